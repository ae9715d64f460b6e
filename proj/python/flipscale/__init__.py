"""Flip-time scaling limits of monotone Boolean functions."""

from ._core import (  # noqa: F401
    Construction,
    FamilySpec,
    FlipscaleError,
    NoFlipError,
    ToleranceNotReachedError,
    UnsupportedError,
    __version__,
    build_plain,
    build_transitive,
    dkw_bound,
    flip_time,
    itermaj_beta,
    itermaj_gamma,
    itermaj_limit,
    ks_distance,
    limit_cdf,
    normalization,
    percolation,
    sample_flip_times,
)


def rescaled_sample(spec, N, seed=1, workers=0):
    """Flip times of `spec` mapped through its normalization a_n (T - b_n)."""
    a, b = normalization(spec)
    return a * (sample_flip_times(spec, N, seed, workers) - b)
