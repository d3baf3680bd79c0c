#include "robinlab/common.hpp"

#include <cstdio>

namespace rml {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::IncompatibleRule: return "IncompatibleRule";
        case ErrorKind::SizeExceeded: return "SizeExceeded";
        case ErrorKind::NonobtuseViolation: return "NonobtuseViolation";
        case ErrorKind::PointOutside: return "PointOutside";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::NotMMatrix: return "NotMMatrix";
        case ErrorKind::CapExceeded: return "CapExceeded";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

void Hasher::bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        state_ ^= p[i];
        state_ *= 1099511628211ull;
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace rml
