#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>

#include "vpsim/state.hpp"

namespace oracle {

inline void for_each_field(vpsim::State& s, const std::function<void(vpsim::ScalarField&)>& fn) {
    for (vpsim::ScalarField* f : {&s.phi, &s.q, &s.v.x, &s.v.y, &s.C.c11, &s.C.c12, &s.C.c22}) fn(*f);
}

inline void for_each_pair(vpsim::State& a, const vpsim::State& b,
                          const std::function<void(vpsim::ScalarField&, const vpsim::ScalarField&)>& fn) {
    fn(a.phi, b.phi);
    fn(a.q, b.q);
    fn(a.v.x, b.v.x);
    fn(a.v.y, b.v.y);
    fn(a.C.c11, b.C.c11);
    fn(a.C.c12, b.C.c12);
    fn(a.C.c22, b.C.c22);
}

/// y += a * x over every field.
inline void axpy(vpsim::State& y, double a, const vpsim::State& x) {
    for_each_pair(y, x, [a](vpsim::ScalarField& u, const vpsim::ScalarField& w) {
        for (std::size_t n = 0; n < u.size(); ++n) u.data[n] += a * w.data[n];
    });
}

inline double max_state_diff(const vpsim::State& a, const vpsim::State& b) {
    double m = 0.0;
    vpsim::State copy = a;
    for_each_pair(copy, b, [&m](vpsim::ScalarField& u, const vpsim::ScalarField& w) {
        for (std::size_t n = 0; n < u.size(); ++n) m = std::max(m, std::abs(u.data[n] - w.data[n]));
    });
    return m;
}

inline bool bitwise_equal(const vpsim::ScalarField& a, const vpsim::ScalarField& b) {
    return a.data.size() == b.data.size() && std::equal(a.data.begin(), a.data.end(), b.data.begin(),
                                                        [](double x, double y) {
                                                            return std::memcmp(&x, &y, sizeof(double)) == 0;
                                                        });
}

inline bool bitwise_equal(const vpsim::State& a, const vpsim::State& b) {
    return bitwise_equal(a.phi, b.phi) && bitwise_equal(a.q, b.q) && bitwise_equal(a.v.x, b.v.x) &&
           bitwise_equal(a.v.y, b.v.y) && bitwise_equal(a.C.c11, b.C.c11) && bitwise_equal(a.C.c12, b.C.c12) &&
           bitwise_equal(a.C.c22, b.C.c22);
}

}  // namespace oracle
