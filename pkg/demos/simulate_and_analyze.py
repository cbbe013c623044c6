"""Simulate a noisy phase scan, extract the witness and its Monte Carlo error."""

from spinpath import (
    TSIRELSON_BOUND,
    load_config,
    simulate_scan,
    transmission_correct,
    witness_from_dataset,
    witness_uncertainty_mc,
)

exp = load_config("mwp_2mm")
ds = transmission_correct(simulate_scan(exp.beamline, exp.alphas, exp.chis, seed=11))
print(f"{exp.label}: {ds.counts.size} cells, {int(ds.counts.sum())} counts in total")

fit = witness_from_dataset(ds, exp.angles, background=exp.background)
raw = witness_from_dataset(ds, exp.angles, use_fits=False, background=exp.background)
sigma = witness_uncertainty_mc(ds, exp.angles, 1000, seed=11, background=exp.background)

print("\nCosine fit per chi:")
for chi, f in sorted(fit.fits.items()):
    print(f"  chi = {chi:+.3f} rad  amplitude {f.amplitude:.3f}  phase {f.phase:+.3f}")

print(f"\nS (fitted curves) = {fit.S:.3f} +/- {sigma:.3f}")
print(f"S (raw counts)    = {raw.S:.3f}")
print(f"ideal for Pol = {fit.polarization:.2f}: {TSIRELSON_BOUND * fit.polarization:.3f}")
print(f"verdict: {fit.verdict}, regime: {fit.regime.tag} (xi/beta_t = {fit.regime.ratio:.2f})")
