"""
From a trial spreadsheet to a saved regimen
===========================================

Trial data arrive as one row per subject.  A schema names the columns for each
stage, and an eligibility column marks subjects who were not re-randomized at
stage 2.  Their blank stage-2 cells are allowed.  We fit AMOL, save the regimen
as JSON, reload it and score it on the data.
"""
import tempfile
from pathlib import Path

import numpy as np

from amol import DatasetSchema, LearnerConfig, estimate_value, fit_amol_simple, load_csv, load_regimen
from amol.io import save_json

rng = np.random.default_rng(3)
n = 300
age = rng.normal(size=n)
severity = rng.normal(size=n)
a1 = rng.choice([-1, 1], n)
out1 = a1 * severity + rng.normal(size=n)
# responders (out1 > 0.5) continue their treatment and are not re-randomized
rand2 = out1 <= 0.5
adherence = np.where(rand2, rng.normal(size=n), np.nan)
a2 = np.where(rand2, rng.choice([-1, 1], n), 0)
out2 = np.where(rand2, a2 * adherence + rng.normal(size=n), 0.0)

workdir = Path(tempfile.mkdtemp())
csv_path = workdir / "trial.csv"
with open(csv_path, "w") as fh:
    fh.write("age,severity,trt1,out1,rand2,adherence,trt2,out2\n")
    for i in range(n):
        stage2 = (f"{adherence[i]:.6f},{a2[i]},{out2[i]:.6f}" if rand2[i] else ",,")
        fh.write(f"{age[i]:.6f},{severity[i]:.6f},{a1[i]},{out1[i]:.6f},{int(rand2[i])},{stage2}\n")

# %% Describe the columns and load
schema = DatasetSchema(features=[["age", "severity"], ["adherence"]], actions=["trt1", "trt2"],
                       rewards=["out1", "out2"], propensities=[0.5, 0.5], eligible=[None, "rand2"])
data = load_csv(csv_path, schema)
print(f"{data.n} subjects, {int((~data.eligible[:, 1]).sum())} not re-randomized at stage 2")

# %% Fit, save, reload and evaluate
report = fit_amol_simple(data, LearnerConfig(cost_grid=(0.25, 1.0, 4.0)))
save_json(report, workdir / "model.json")
regimen = load_regimen(workdir / "model.json")
print("estimated value", estimate_value(regimen, data).to_dict())
print("model written to", workdir / "model.json")
