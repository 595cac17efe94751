"""Theory-versus-experiment comparison of cumulant trajectories."""

from dataclasses import dataclass

import numpy as np


def relative_error(reference, value):
    """|value - reference| / |reference|; 0 where both are 0, inf where only
    the reference is 0."""
    reference = np.asarray(reference, dtype=float)
    value = np.asarray(value, dtype=float)
    diff = np.abs(value - reference)
    den = np.abs(reference)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, diff / den, np.where(diff == 0, 0.0, np.inf))
    return out


def migration_window_mask(migrated, window=2):
    """True for generations farther than ``window`` from every migration."""
    migrated = np.asarray(migrated, dtype=bool)
    keep = np.ones(migrated.size, dtype=bool)
    for g in np.flatnonzero(migrated):
        keep[max(0, g - window): g + window + 1] = False
    return keep


def within_tolerance(reference, value, stderr, rel_tol, n_se=3.0):
    """Agreement test with a sampling-noise floor:
    |value - reference| <= max(rel_tol |reference|, n_se * stderr)."""
    reference = np.asarray(reference, dtype=float)
    value = np.asarray(value, dtype=float)
    stderr = np.nan_to_num(np.asarray(stderr, dtype=float), nan=0.0)
    return np.abs(value - reference) <= np.maximum(rel_tol * np.abs(reference), n_se * stderr)


@dataclass
class ComparisonReport:
    rel_error: np.ndarray  # (N_g + 1, N_I, K)
    mask: np.ndarray  # (N_g + 1,), True where a generation is scored
    window: int

    @property
    def per_generation_max(self):
        return self.rel_error.max(axis=1)

    def summary(self):
        """Mean and max relative error per cumulant over scored generations."""
        sel = self.rel_error[self.mask]
        return {
            f"k{i + 1}": {"mean": float(np.mean(sel[..., i])), "max": float(np.max(sel[..., i]))}
            for i in range(sel.shape[-1])
        }


def compare(theory, empirical, migrated, window=2, orders=None):
    theory = np.asarray(theory, dtype=float)
    empirical = np.asarray(empirical, dtype=float)
    if orders is not None:
        theory, empirical = theory[..., :orders], empirical[..., :orders]
    if theory.shape != empirical.shape:
        raise ValueError(f"shape mismatch: theory {theory.shape} vs empirical {empirical.shape}")
    migrated = np.asarray(migrated, dtype=bool)
    if migrated.size != theory.shape[0]:
        raise ValueError("migration flags do not match the number of generations")
    return ComparisonReport(rel_error=relative_error(theory, empirical),
                            mask=migration_window_mask(migrated, window), window=window)
