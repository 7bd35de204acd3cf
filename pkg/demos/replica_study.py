"""
Uncertainty on a two-modality tabular replica
=============================================

Fits the fused model and a feature-concatenation evidential baseline on
a synthetic replica of a two-view tabular task, then walks through OOD
detection, corruption robustness, decision fusion, UEIR and the
uncertainty trends. Takes a couple of minutes on one core.
"""

from monig import experiments as ex
from monig.evaluation import epistemic_vs_trainsize, evaluate, uncertainty_noise_curve
from monig.model import MultimodalRegressor

seed = 0
data = ex.make_replica(seed)
cfg = ex.replica_config(seed)

monig = ex.fit("monig", data, cfg)
evd = ex.fit("evd-df", data, cfg)
print("clean test:", {k: round(v, 3) if isinstance(v, float) else v for k, v in evaluate(monig, data).to_dict().items()})

test = data.subset("test")
print("\nOOD detection (AUROC)")
for row in ex.ood_grid(monig, test):
    print(f"  {row['mode']:8s} eps={row['epsilon']:.1f}  AU {row['auroc_au']:.3f}  EU {row['auroc_eu']:.3f}")

print("\nRMSE with one random modality corrupted")
for row in ex.robustness_table({"monig": monig, "evd_concat": evd}, test):
    print(f"  eps={row['epsilon']:.2f}  monig {row['monig']:.3f}  evd_concat {row['evd_concat']:.3f}")

print("\ndecision fusion on clean data:", {k: round(v, 3) for k, v in ex.decision_fusion_table(monig, data).items()})
print("UEIR:", ex.ueir_table({"monig": monig, "evd_concat": evd}, data))

print("\nmean uncertainty as every test row gets noisier")
for eps, au, eu in uncertainty_noise_curve(monig, data, [0.0, 0.1, 0.25, 0.5, 1.0]):
    print(f"  eps={eps:.2f}  AU {au:.2f}  EU {eu:.2f}")

# smaller nets keep the five retrains quick
build = lambda dims, s: MultimodalRegressor(dims, (32,) * 3, pseudo_hidden_dims=(32,), seed=s)
print("\nmean EU against share of training data")
for frac, eu in epistemic_vs_trainsize(data, [0.2, 0.4, 0.6, 0.8, 1.0], build, ex.replica_config(seed, epochs=40)):
    print(f"  {frac:.0%}  EU {eu:.2f}")
