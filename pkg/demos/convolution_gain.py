"""Convolving a Cantor measure with itself raises its L^q dimension.

The middle-thirds measure has L^2 dimension log 2 / log 3 ~ 0.631.  Its
self-convolution is smoother, and we watch the finite-scale exponents of
both, scale by scale.
"""
from lqdim import convolve, generate, lq_exponent, middle_thirds, normalize_to_unit

mu_spec = middle_thirds()
print(f"{'m':>3} {'mu':>8} {'mu*mu':>8} {'gain':>8}")
for m in range(12, 23, 2):
    mu = generate(mu_spec, m)
    nu = convolve(mu, mu)
    a, b = lq_exponent(mu, 2), lq_exponent(nu, 2)
    print(f"{m:>3} {a:8.4f} {b:8.4f} {b - a:8.4f}")

# n-fold powers live on [0, n); rescale to the unit interval before comparing
print("\nRepeated convolution keeps climbing toward 1:")
nu = mu = generate(mu_spec, 16)
for n in range(1, 5):
    print(f"  n={n}: {lq_exponent(normalize_to_unit(nu), 2):.4f}")
    nu = convolve(nu, mu)
