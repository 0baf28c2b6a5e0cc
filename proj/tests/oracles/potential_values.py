"""High-precision reference values frozen into test_physics.cpp / test_relenergy.cpp."""
from mpmath import mp, mpf, log, cot, pi, tanh, sqrt

mp.dps = 40
chi = mpf(28) / 11


def f(p):
    return p * log(p) + (1 - p) * log(1 - p) + chi * p * (1 - p)


def fp(p):
    return log(p) - log(1 - p) + chi * (1 - 2 * p)


print("f(0.5)            =", f(mpf("0.5")))
print("f''(0.5)          =", 4 - 2 * chi)
p, ph = mpf("0.6"), mpf("0.5")
print("f(0.6|0.5)        =", f(p) - f(ph) - fp(ph) * (p - ph))
print("elastic min       =", mpf(1) / 2 + log(2) / 2)
print("A(0.99), A(0.01)  =", [mpf("0.5") * (1 + tanh(1000 * (cot(pi / 2) - cot(pi * x)))) for x in (mpf("0.99"), mpf("0.01"))])
