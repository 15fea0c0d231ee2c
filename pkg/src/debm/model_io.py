"""Model persistence: a single human-readable JSON file.

The format is versioned; loading a file written by a newer format fails
loudly rather than guessing.  Floats round-trip exactly through JSON, so
save/load/stage reproduces in-process staging bit for bit.
"""

import json

import numpy as np

from .errors import DataError
from .mixture import FitBounds, MixtureFit
from .ordering import Timeline
from .pipeline import ProgressionModel

MODEL_FORMAT_VERSION = 1


def _bounds_to_dict(bounds):
    if bounds is None:
        return None
    return {
        "mu_pre": list(bounds.mu_pre),
        "sigma_pre": list(bounds.sigma_pre),
        "mu_post": list(bounds.mu_post),
        "sigma_post": list(bounds.sigma_post),
        "theta": list(bounds.theta),
    }


def _bounds_from_dict(d):
    if d is None:
        return None
    return FitBounds(
        mu_pre=tuple(d["mu_pre"]),
        sigma_pre=tuple(d["sigma_pre"]),
        mu_post=tuple(d["mu_post"]),
        sigma_post=tuple(d["sigma_post"]),
        theta=tuple(d["theta"]),
    )


def model_to_dict(model):
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "method": model.method,
        "seed": model.seed,
        "biomarkers": list(model.biomarkers),
        "mixtures": {
            name: {
                "mu_pre": fit.mu_pre,
                "sigma_pre": fit.sigma_pre,
                "mu_post": fit.mu_post,
                "sigma_post": fit.sigma_post,
                "theta_pre": fit.theta_pre,
                "theta_post": fit.theta_post,
                "direction": fit.direction,
                "bounds": _bounds_to_dict(bounds),
            }
            for name, fit, bounds in zip(model.biomarkers, model.fits, model.bounds)
        },
        "timeline": {
            "ordering": [model.biomarkers[i] for i in model.timeline.ordering],
            "centers": model.timeline.centers.tolist(),
        },
        "diagnostics": model.diagnostics,
    }


def model_from_dict(doc):
    version = doc.get("format_version")
    if not isinstance(version, int) or version > MODEL_FORMAT_VERSION:
        raise DataError(
            f"model format version {version!r} is newer than supported "
            f"({MODEL_FORMAT_VERSION}); refusing to guess"
        )
    names = list(doc["biomarkers"])
    fits, bounds = [], []
    for name in names:
        entry = doc["mixtures"][name]
        fits.append(MixtureFit(
            mu_pre=entry["mu_pre"], sigma_pre=entry["sigma_pre"],
            mu_post=entry["mu_post"], sigma_post=entry["sigma_post"],
            theta_pre=entry["theta_pre"], theta_post=entry["theta_post"],
        ))
        bounds.append(_bounds_from_dict(entry.get("bounds")))
    index_of = {n: i for i, n in enumerate(names)}
    ordering = np.array([index_of[n] for n in doc["timeline"]["ordering"]])
    timeline = Timeline(ordering=ordering, centers=np.asarray(doc["timeline"]["centers"]))
    return ProgressionModel(
        method=doc["method"],
        biomarkers=names,
        fits=fits,
        bounds=bounds,
        timeline=timeline,
        seed=doc.get("seed", 0),
        diagnostics=doc.get("diagnostics", {}),
    )


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)
