"""Re-project every training point through OSE and report how far it lands
from its fitted coordinates, relative to the median nearest-neighbour spacing.

    python3 scripts/ose_consistency.py --noise 0.05
"""

import argparse

import numpy as np
from scipy.spatial.distance import cdist

from cm2l.data import SyntheticConfig, generate_synthetic_pair
from cm2l.ose import out_of_sample_batch
from cm2l.retrieval import FitConfig, fit_model


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--k-ose", type=int, default=20)
    p.add_argument("--q-max", type=int)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    d1, d2, links = generate_synthetic_pair(SyntheticConfig(args.n, 2, (10, 15), args.noise, 4, args.seed))
    model = fit_model(d1.features, d2.features, links, FitConfig(k_ose=args.k_ose, q_max=args.q_max, seed=args.seed))
    print(f"q = {model.q}")
    for mod in (1, 2):
        x, z = model.train_x(mod), model.target_embedding(mod)
        err = np.linalg.norm(out_of_sample_batch(x, x, z, model.ose_cfg) - z, axis=1)
        nn = cdist(z, z)
        np.fill_diagonal(nn, np.inf)
        spacing = np.median(nn.min(axis=1))
        print(f"modality {mod}: median error {np.median(err):.4g} = {np.median(err) / spacing:.2f}x spacing; "
              f"within 0.1x spacing: {np.mean(err <= 0.1 * spacing):.1%}")


if __name__ == "__main__":
    main()
