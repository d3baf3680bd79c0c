#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rml {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr bool operator==(const Vec2&) const = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

struct Box {
    Vec2 lo;
    Vec2 hi;
    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
};

enum class ErrorKind {
    InvalidArgument,
    IncompatibleRule,
    SizeExceeded,
    NonobtuseViolation,
    PointOutside,
    NoConvergence,
    NotMMatrix,
    CapExceeded,
    InsufficientData,
    ConfigInvalid,
    Io,
};

const char* to_string(ErrorKind kind);

// Every failure in the library surfaces as an Error carrying a kind, so callers
// (the experiment runner in particular) can record it without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// FNV-1a, used for content hashes of domains and configs.
class Hasher {
public:
    void bytes(const void* data, std::size_t n);
    void f64(double v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void str(const std::string& s) { bytes(s.data(), s.size()); }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 1469598103934665603ull;
};

std::string hex64(std::uint64_t v);

}  // namespace rml
