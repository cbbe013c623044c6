"""Solve the four-flipper focusing condition and trace the branch separation."""

import numpy as np

from spinpath import RfFlipperQuartet, delta_y_profile, solve_focusing
from spinpath.beamline import ANGSTROM

distances = (1.20, 2.383, 1.065, 1.18)  # L12, L2S, LS3, L34 in m
nu1 = 600e3

nu = solve_focusing(nu1, *distances)
print("Overlap-mode frequencies for nu1 = 600 kHz:")
for name, f in zip(("nu2", "nu3", "nu4"), nu):
    print(f"  {name} = {f / 1e3:8.3f} kHz")

overlap = RfFlipperQuartet((nu1, *nu), distances, mode="overlap")
conventional = RfFlipperQuartet((500e3,) * 4, distances, mode="conventional")

for lam in (4.0, 8.0):
    print(f"\nSeparation profile at {lam:g} A (nm):")
    for label, quartet in (("overlap", overlap), ("conventional", conventional)):
        prof = delta_y_profile(quartet, lam * ANGSTROM)
        row = "  ".join(f"{lbl}={dy * 1e9:8.2f}" for lbl, dy in zip(prof.labels, prof.delta_y))
        print(f"  {label:12s} {row}")

p4 = delta_y_profile(overlap, 4 * ANGSTROM)
p8 = delta_y_profile(overlap, 8 * ANGSTROM)
print(f"\nDoubling the wavelength scales the peak separation by {p8.max_abs / p4.max_abs:.2f}")
print("Overlap mode closes the separation at the sample and after RF4;")
print("conventional mode holds it constant between RF2 and RF3.")
