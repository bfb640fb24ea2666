import numpy as np

from normlogit import ChoiceDataset


def random_dataset(rng, n_tasks=40, n_alts=(2, 5), k=3, outside=True, explicit=False, scale=1.0):
    """Small dataset with ragged task sizes and uniformly random choices."""
    sizes = rng.integers(n_alts[0], n_alts[1] + 1, n_tasks)
    X = rng.normal(size=(sizes.sum(), k)) * scale
    ptr = np.concatenate([[0], np.cumsum(sizes)])
    lo = -1 if outside else 0
    chosen = np.array([rng.integers(lo, s) for s in sizes])
    return ChoiceDataset(X, ptr, chosen, includes_outside_option=outside,
                         explicit_intercept=explicit)
