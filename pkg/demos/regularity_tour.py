"""Uniform perfectness, porosity and Ahlfors regularity on three examples."""
from lqdim import (
    DyadicMeasure,
    central_cantor,
    fit_ahlfors,
    fit_uniform_perfectness,
    generate,
    middle_thirds,
    regularity_report,
)

examples = {
    "interval": DyadicMeasure.uniform(16),
    "middle thirds": generate(middle_thirds(), 16),
    "quarter Cantor": generate(central_cantor(0.25), 16),
}
for name, mu in examples.items():
    up = fit_uniform_perfectness(mu)
    ah = fit_ahlfors(mu)
    rep = regularity_report(mu).to_dict()
    print(f"{name}:")
    print(f"  uniformly perfect: N={up.N}, gamma={up.gamma}")
    print(f"  Ahlfors fit: alpha={ah.alpha:.3f}, C={ah.C:.2f}")
    print(f"  porosity k: {rep['porosity_k']}, doubling: {rep['doubling_constant']}")

# A lone atom far from the rest breaks uniform perfectness at every scale.
bad = DyadicMeasure.from_atoms(10, [0] + list(range(768, 1024)), [1.0] * 257, normalize=True)
print("\nisolated atom:", fit_uniform_perfectness(bad).to_dict())
