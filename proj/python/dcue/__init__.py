"""Debiased continuously updated GMM for partially linear IV models with many weak instruments.

Thin wrapper over the C++ core. Results come back as plain dicts and numpy arrays.
"""

import csv
import io
import json

import numpy as np

try:
    from . import _dcue
except ImportError:  # in-tree build: the extension sits next to the package
    import _dcue

__version__ = _dcue.__version__
ConfigError = _dcue.ConfigError
DataError = _dcue.DataError
NumericalError = _dcue.NumericalError

chisq_cdf = _dcue.chisq_cdf
chisq_sf = _dcue.chisq_sf
chisq_quantile = _dcue.chisq_quantile

_DEFAULT_METHODS = ("cue", "tsls", "gmm")


def _methods(methods):
    return methods if isinstance(methods, str) else ",".join(methods)


def estimate(y, d, z, x=None, methods=_DEFAULT_METHODS, learner="spline", folds=4, seed=1, beta_star=0.0):
    """Cross-fit the nuisances and estimate beta. `learner` is a name or a dict of options."""
    y = np.asarray(y, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    x = np.zeros((len(y), 0)) if x is None else np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    text = _dcue.estimate_arrays(y, d, z, x, _methods(methods), json.dumps(learner), folds, seed, beta_star)
    return json.loads(text)


def estimate_csv(path, outcome, treatment, instruments, covariates=(), methods=_DEFAULT_METHODS, learner="spline",
                 folds=4, seed=1, beta_star=0.0):
    text = _dcue.estimate_csv(str(path), outcome, treatment, list(instruments), list(covariates), _methods(methods),
                              json.dumps(learner), folds, seed, beta_star)
    return json.loads(text)


def generate(scenario="s1", seed=1, **config):
    """One simulated dataset: dict with y, d, z, x and beta0."""
    config["scenario"] = scenario
    return _dcue.generate(json.dumps(config), seed)


def simulate(scenario="s1", **config):
    """Run one Monte Carlo cell.

    Keyword options mirror the simulate config section (n, m, cp, reps, seed, methods, learner, rho, beta0,
    folds, workers, ...). Returns {"cell": metrics dict, "records": list of per-replication dicts}.
    """
    config["scenario"] = scenario
    if "methods" in config:
        config["methods"] = _methods(config["methods"])
    cell, records = _dcue.simulate(json.dumps(config))
    return {"cell": json.loads(cell), "records": list(csv.DictReader(io.StringIO(records)))}


def render_table(cells, format="markdown"):
    """Markdown, csv or json table from cell dicts as returned by simulate()."""
    return _dcue.render_table(json.dumps(list(cells)), format)


def selftest(seed=20240101, instances=100):
    return _dcue.selftest(seed, instances)


__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "chisq_cdf",
    "chisq_quantile",
    "chisq_sf",
    "estimate",
    "estimate_csv",
    "generate",
    "render_table",
    "selftest",
    "simulate",
]
