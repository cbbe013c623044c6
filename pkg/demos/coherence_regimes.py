"""Compare entanglement length with transverse coherence for the bundled setups."""

from spinpath import load_config
from spinpath.coherence import beta_t, overlap_regime

names = ("rf_conv_prior", "mwp_0p5mm", "mwp_2mm", "mwp_4mm", "rf_conv", "rf_overlap")
print(f"{'config':14s} {'xi (nm)':>8s} {'beta_t (nm)':>12s} {'xi/beta_t':>10s}  regime")
for name in names:
    cfg = load_config(name).beamline
    xi, beta = cfg.entanglement_length(), cfg.beta_t()
    reg = overlap_regime(xi, beta)
    print(f"{name:14s} {xi * 1e9:8.1f} {beta * 1e9:12.1f} {reg.ratio:10.3f}  {reg.tag}")

print("\nSlit width sets the geometric coherence length (5.4 A, 3.26 m):")
for name in ("mwp_0p5mm", "mwp_2mm", "mwp_4mm"):
    geom = load_config(name).beamline.geometry
    print(f"  a = {geom.slit_width * 1e3:3.1f} mm  beta_t = {beta_t(geom) * 1e9:6.1f} nm")
