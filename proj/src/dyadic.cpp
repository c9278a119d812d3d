#include "medsynth/dyadic.hpp"

#include <cmath>
#include <cstdlib>

#include "medsynth/errors.hpp"

namespace medsynth {

// ---------------------------------------------------------------------------
// BigInt

BigInt BigInt::from_i64(std::int64_t v) {
    BigInt out;
    if (v == 0) {
        return out;
    }
    out.sign_ = v > 0 ? 1 : -1;
    std::uint64_t mag = v > 0 ? static_cast<std::uint64_t>(v)
                              : ~static_cast<std::uint64_t>(v) + 1;  // |INT64_MIN| safe
    while (mag != 0) {
        out.mag_.push_back(static_cast<std::uint32_t>(mag & 0xffffffffu));
        mag >>= 32;
    }
    return out;
}

void BigInt::normalize() {
    while (!mag_.empty() && mag_.back() == 0) {
        mag_.pop_back();
    }
    if (mag_.empty()) {
        sign_ = 0;
    }
}

int BigInt::compare_mag(const std::vector<std::uint32_t>& a,
                        const std::vector<std::uint32_t>& b) {
    if (a.size() != b.size()) {
        return a.size() < b.size() ? -1 : 1;
    }
    for (std::size_t i = a.size(); i-- > 0;) {
        if (a[i] != b[i]) {
            return a[i] < b[i] ? -1 : 1;
        }
    }
    return 0;
}

std::vector<std::uint32_t> BigInt::add_mag(const std::vector<std::uint32_t>& a,
                                           const std::vector<std::uint32_t>& b) {
    std::vector<std::uint32_t> out;
    out.reserve(std::max(a.size(), b.size()) + 1);
    std::uint64_t carry = 0;
    for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
        std::uint64_t sum = carry;
        if (i < a.size()) sum += a[i];
        if (i < b.size()) sum += b[i];
        out.push_back(static_cast<std::uint32_t>(sum & 0xffffffffu));
        carry = sum >> 32;
    }
    if (carry != 0) {
        out.push_back(static_cast<std::uint32_t>(carry));
    }
    return out;
}

std::vector<std::uint32_t> BigInt::sub_mag(const std::vector<std::uint32_t>& a,
                                           const std::vector<std::uint32_t>& b) {
    std::vector<std::uint32_t> out;
    out.reserve(a.size());
    std::int64_t borrow = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::int64_t diff = static_cast<std::int64_t>(a[i]) - borrow;
        if (i < b.size()) {
            diff -= static_cast<std::int64_t>(b[i]);
        }
        if (diff < 0) {
            diff += (std::int64_t{1} << 32);
            borrow = 1;
        } else {
            borrow = 0;
        }
        out.push_back(static_cast<std::uint32_t>(diff));
    }
    while (!out.empty() && out.back() == 0) {
        out.pop_back();
    }
    return out;
}

BigInt BigInt::add(const BigInt& a, const BigInt& b) {
    if (a.sign_ == 0) return b;
    if (b.sign_ == 0) return a;
    BigInt out;
    if (a.sign_ == b.sign_) {
        out.sign_ = a.sign_;
        out.mag_ = add_mag(a.mag_, b.mag_);
    } else {
        const int cmp = compare_mag(a.mag_, b.mag_);
        if (cmp == 0) {
            return out;  // zero
        }
        const BigInt& big = cmp > 0 ? a : b;
        const BigInt& small = cmp > 0 ? b : a;
        out.sign_ = big.sign_;
        out.mag_ = sub_mag(big.mag_, small.mag_);
    }
    out.normalize();
    return out;
}

BigInt BigInt::negated() const {
    BigInt out = *this;
    out.sign_ = -out.sign_;
    return out;
}

BigInt BigInt::sub(const BigInt& a, const BigInt& b) { return add(a, b.negated()); }

BigInt BigInt::shifted_left(unsigned bits) const {
    if (is_zero() || bits == 0) {
        return *this;
    }
    BigInt out;
    out.sign_ = sign_;
    const unsigned words = bits / 32;
    const unsigned rem = bits % 32;
    out.mag_.assign(words, 0);
    std::uint32_t carry = 0;
    for (std::uint32_t limb : mag_) {
        if (rem == 0) {
            out.mag_.push_back(limb);
        } else {
            out.mag_.push_back((limb << rem) | carry);
            carry = static_cast<std::uint32_t>(static_cast<std::uint64_t>(limb) >> (32 - rem));
        }
    }
    if (rem != 0 && carry != 0) {
        out.mag_.push_back(carry);
    }
    out.normalize();
    return out;
}

BigInt BigInt::mul_u64(const BigInt& a, std::uint64_t m) {
    BigInt out;
    if (a.is_zero() || m == 0) {
        return out;
    }
    out.sign_ = a.sign_;
    const std::uint64_t lo = m & 0xffffffffu;
    const std::uint64_t hi = m >> 32;
    std::vector<std::uint32_t> part_lo, part_hi;
    std::uint64_t carry = 0;
    for (std::uint32_t limb : a.mag_) {
        const std::uint64_t prod = static_cast<std::uint64_t>(limb) * lo + carry;
        part_lo.push_back(static_cast<std::uint32_t>(prod & 0xffffffffu));
        carry = prod >> 32;
    }
    while (carry != 0) {
        part_lo.push_back(static_cast<std::uint32_t>(carry & 0xffffffffu));
        carry >>= 32;
    }
    if (hi != 0) {
        carry = 0;
        part_hi.push_back(0);  // shift by one limb
        for (std::uint32_t limb : a.mag_) {
            const std::uint64_t prod = static_cast<std::uint64_t>(limb) * hi + carry;
            part_hi.push_back(static_cast<std::uint32_t>(prod & 0xffffffffu));
            carry = prod >> 32;
        }
        while (carry != 0) {
            part_hi.push_back(static_cast<std::uint32_t>(carry & 0xffffffffu));
            carry >>= 32;
        }
        out.mag_ = add_mag(part_lo, part_hi);
    } else {
        out.mag_ = std::move(part_lo);
    }
    out.normalize();
    return out;
}

double BigInt::to_double() const {
    double value = 0.0;
    for (std::size_t i = mag_.size(); i-- > 0;) {
        value = value * 4294967296.0 + static_cast<double>(mag_[i]);
    }
    return sign_ < 0 ? -value : value;
}

// ---------------------------------------------------------------------------
// Dyadic

Dyadic Dyadic::from_double(double value) {
    if (!std::isfinite(value)) {
        throw ArgumentError("Dyadic::from_double: value must be finite");
    }
    Dyadic out;
    if (value == 0.0) {
        return out;
    }
    int exp = 0;
    const double frac = std::frexp(value, &exp);  // value = frac * 2^exp, |frac| in [0.5,1)
    const double scaled = std::ldexp(frac, 53);   // integral by construction
    out.mantissa_ = BigInt::from_i64(static_cast<std::int64_t>(scaled));
    out.exponent_ = exp - 53;
    return out;
}

double Dyadic::to_double() const {
    return std::ldexp(mantissa_.to_double(), exponent_);
}

Dyadic Dyadic::add(const Dyadic& a, const Dyadic& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    Dyadic out;
    out.exponent_ = std::min(a.exponent_, b.exponent_);
    const BigInt ma = a.mantissa_.shifted_left(
        static_cast<unsigned>(a.exponent_ - out.exponent_));
    const BigInt mb = b.mantissa_.shifted_left(
        static_cast<unsigned>(b.exponent_ - out.exponent_));
    out.mantissa_ = BigInt::add(ma, mb);
    if (out.mantissa_.is_zero()) {
        out.exponent_ = 0;
    }
    return out;
}

Dyadic Dyadic::sub(const Dyadic& a, const Dyadic& b) {
    Dyadic negated = b;
    negated.mantissa_ = b.mantissa_.negated();
    return add(a, negated);
}

Dyadic Dyadic::mul_u64(const Dyadic& a, std::uint64_t m) {
    Dyadic out;
    out.mantissa_ = BigInt::mul_u64(a.mantissa_, m);
    out.exponent_ = out.mantissa_.is_zero() ? 0 : a.exponent_;
    return out;
}

bool operator==(const Dyadic& a, const Dyadic& b) {
    return Dyadic::sub(a, b).is_zero();
}

}  // namespace medsynth
