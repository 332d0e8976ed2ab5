"""C + C = [0, 2] for the middle-thirds set, seen three ways."""
from lqdim import (
    astels_check,
    construction_intervals,
    derive_thickness,
    generate_set,
    interval_detect,
    middle_thirds,
    nfold_sumset_experiment,
    sumset,
)

C = generate_set(middle_thirds(), 16)
print("C is an interval:", interval_detect(C))
print("C + C is an interval:", interval_detect(sumset(C, C)))

t = derive_thickness(construction_intervals(middle_thirds(), 12))
print(f"thickness of C: {t.tau} (exact {t.exact})")
print("Newhouse/Astels sum condition:", astels_check([t.tau, t.tau]).to_dict())

rep = nfold_sumset_experiment(middle_thirds(), n_max=4, level=14)
print(f"n-fold sums of C: first interval at n = {rep.first_interval}")
