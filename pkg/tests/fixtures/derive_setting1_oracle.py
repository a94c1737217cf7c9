"""Regenerate setting1_oracle.json: values of reference regimens in setting 1.

The derived optimal regimen (backward induction with Gauss-Hermite
quadrature, see ``amol.simulation``) is compared with the stagewise-greedy
regimen that takes the sign of each stage's own reward contrast, and with a
fair coin.  The greedy rule is coded here independently of the package.
"""
import json
from pathlib import Path

import numpy as np

from amol.simulation import RandomPolicy, Setting1, Setting1Oracle
from amol.value import true_value_mc


class Greedy:
    def decide_stage(self, k, data, latent=None):
        X, R = data.features[0], data.rewards
        contrast = {1: X[:, 0],
                    2: R[:, 0] + X[:, 1] ** 2 + X[:, 2] ** 2 - 0.8,
                    3: R[:, 1] + X[:, 3],
                    4: R[:, 2] - 0.5}[k]
        return np.where(contrast >= 0, 1, -1)


N_TEST, SEED = 100_000, 20240101
gen = Setting1()
values = {"n_test": N_TEST, "seed": SEED,
          "oracle": true_value_mc(Setting1Oracle(), gen, N_TEST, SEED),
          "greedy": true_value_mc(Greedy(), gen, N_TEST, SEED),
          "random": true_value_mc(RandomPolicy(1), gen, N_TEST, SEED)}
out = Path(__file__).with_name("setting1_oracle.json")
out.write_text(json.dumps(values, indent=1, sort_keys=True) + "\n")
print(values)
