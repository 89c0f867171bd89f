#pragma once

#include <complex>

namespace isojet {

/// Complex numbers over a real scalar type that need not be a field element
/// of std::complex (e.g. Jet).
template <class S>
struct Cplx {
    S re;
    S im;

    friend Cplx operator+(const Cplx& a, const Cplx& b) { return {a.re + b.re, a.im + b.im}; }
    friend Cplx operator-(const Cplx& a, const Cplx& b) { return {a.re - b.re, a.im - b.im}; }
    friend Cplx operator*(const Cplx& a, const Cplx& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend Cplx operator/(const Cplx& a, const Cplx& b) {
        const S den = b.re * b.re + b.im * b.im;
        return {(a.re * b.re + a.im * b.im) / den, (a.im * b.re - a.re * b.im) / den};
    }
    friend Cplx operator*(std::complex<double> c, const Cplx& z) {
        return {z.re * c.real() - z.im * c.imag(), z.im * c.real() + z.re * c.imag()};
    }
    friend Cplx operator+(const Cplx& z, std::complex<double> c) { return {z.re + c.real(), z.im + c.imag()}; }
    friend Cplx operator*(const Cplx& z, double s) { return {z.re * s, z.im * s}; }
    Cplx operator-() const { return {-re, -im}; }
};

template <class S>
Cplx<S> conj(const Cplx<S>& z) {
    return {z.re, -z.im};
}

template <class S>
S abs2(const Cplx<S>& z) {
    return z.re * z.re + z.im * z.im;
}

}  // namespace isojet
