#pragma once

#include <cstdint>
#include <vector>

namespace medsynth {

// Arbitrary-precision signed integer: just the operations exact dyadic
// arithmetic needs (add, subtract, shift, small multiply, compare).
class BigInt {
public:
    BigInt() = default;
    static BigInt from_i64(std::int64_t v);

    bool is_zero() const { return mag_.empty(); }
    int sign() const { return sign_; }
    double to_double() const;  // approximate

    BigInt shifted_left(unsigned bits) const;
    static BigInt add(const BigInt& a, const BigInt& b);
    static BigInt sub(const BigInt& a, const BigInt& b);
    static BigInt mul_u64(const BigInt& a, std::uint64_t m);
    BigInt negated() const;

    friend bool operator==(const BigInt& a, const BigInt& b) {
        return a.sign_ == b.sign_ && a.mag_ == b.mag_;
    }

private:
    static std::vector<std::uint32_t> add_mag(const std::vector<std::uint32_t>& a,
                                              const std::vector<std::uint32_t>& b);
    // Requires |a| >= |b|.
    static std::vector<std::uint32_t> sub_mag(const std::vector<std::uint32_t>& a,
                                              const std::vector<std::uint32_t>& b);
    static int compare_mag(const std::vector<std::uint32_t>& a,
                           const std::vector<std::uint32_t>& b);
    void normalize();

    int sign_ = 0;                    // -1, 0, +1
    std::vector<std::uint32_t> mag_;  // little-endian limbs, no leading zeros
};

// Exact dyadic rational: mantissa * 2^exponent. Every finite double converts
// exactly, and sums/differences of dyadics are again dyadic, so statements
// like "these advantages sum to exactly zero" can be checked without any
// rounding.
class Dyadic {
public:
    Dyadic() = default;
    static Dyadic from_double(double value);  // ArgumentError on non-finite

    bool is_zero() const { return mantissa_.is_zero(); }
    double to_double() const;

    static Dyadic add(const Dyadic& a, const Dyadic& b);
    static Dyadic sub(const Dyadic& a, const Dyadic& b);
    static Dyadic mul_u64(const Dyadic& a, std::uint64_t m);

    friend bool operator==(const Dyadic& a, const Dyadic& b);

private:
    BigInt mantissa_;
    int exponent_ = 0;
};

}  // namespace medsynth
