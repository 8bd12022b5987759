"""Versioned ``.npz`` storage for trained classifiers.

Arrays are written little-endian; ``kind`` is ``forest`` or ``svm`` and
``params`` holds the estimator's hyperparameters as JSON.
"""

import json

import numpy as np
from sklearn.pipeline import Pipeline

from .forest import BalancedRandomForestClassifier
from .preprocessing import StandardizationParams, Standardizer
from .svm import BalancedSVC

FORMAT_VERSION = 1
_NODE_DTYPES = {"feature": "<i8", "threshold": "<f8", "left": "<i8", "right": "<i8",
                "value": "<f8", "impurity": "<f8", "n_node_samples": "<i8",
                "weighted_n_node_samples": "<f8"}
_NATIVE = {"<i8": np.int64, "<f8": np.float64}


def _common(kind, params, feature_names, classes):
    return {
        "format_version": np.array(FORMAT_VERSION, dtype="<i8"),
        "kind": np.array(kind),
        "params": np.array(json.dumps(params, sort_keys=True)),
        "feature_names": np.array(list(feature_names), dtype=str),
        "classes": np.asarray(classes).astype("<i8"),
    }


def save_classifier(model, path, feature_names):
    """Store a fitted forest or a fitted ``Standardizer -> BalancedSVC`` pipeline."""
    if isinstance(model, BalancedRandomForestClassifier):
        arrays = _common("forest", model.get_params(), feature_names, model.classes_)
        for name, dtype in _NODE_DTYPES.items():
            arrays["node_" + name] = model.nodes_[name].astype(dtype)
        arrays.update(
            roots=model.roots_.astype("<i8"), tree_sizes=model.tree_sizes_.astype("<i8"),
            feature_importances=model.feature_importances_.astype("<f8"),
            class_weight=model.class_weight_.astype("<f8"),
            max_features_resolved=np.array(model.max_features_, dtype="<i8"),
        )
    elif isinstance(model, Pipeline) and isinstance(model.steps[-1][1], BalancedSVC):
        scaler = model.steps[0][1]
        svc = model.steps[-1][1]
        arrays = _common("svm", svc.get_params(), feature_names, svc.classes_)
        arrays.update(
            scale_mean=scaler.mean_.astype("<f8"), scale_scale=scaler.scale_.astype("<f8"),
            scale_constant=np.asarray(scaler.params_.constant, dtype=bool),
            support=svc.support_.astype("<i8"),
            support_vectors=svc.support_vectors_.astype("<f8"),
            dual_coef=svc.dual_coef_.astype("<f8"),
            intercept=np.array(svc.intercept_, dtype="<f8"),
            prob_a=np.array(svc.probA_, dtype="<f8"), prob_b=np.array(svc.probB_, dtype="<f8"),
            class_weight=svc.class_weight_.astype("<f8"),
            converged=np.array(svc.converged_), objective=np.array(svc.objective_, dtype="<f8"),
        )
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    np.savez(path, **arrays)


def load_classifier(path):
    """Returns ``(model, feature_names)``."""
    with np.load(path, allow_pickle=False) as d:
        if int(d["format_version"]) != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {int(d['format_version'])}")
        kind = str(d["kind"])
        params = json.loads(str(d["params"]))
        names = [str(n) for n in d["feature_names"]]
        classes = d["classes"].astype(np.int64)
        n_features = len(names)
        if kind == "forest":
            model = BalancedRandomForestClassifier(**params)
            model.nodes_ = {name: d["node_" + name].astype(_NATIVE[dt])
                            for name, dt in _NODE_DTYPES.items()}
            model.roots_ = d["roots"].astype(np.int64)
            model.tree_sizes_ = d["tree_sizes"].astype(np.int64)
            model.feature_importances_ = d["feature_importances"].astype(np.float64)
            model.class_weight_ = d["class_weight"].astype(np.float64)
            model.max_features_ = int(d["max_features_resolved"])
        elif kind == "svm":
            scaler = Standardizer()
            mean = d["scale_mean"].astype(np.float64)
            scale = d["scale_scale"].astype(np.float64)
            scaler.params_ = StandardizationParams(mean=mean, scale=scale, constant=d["scale_constant"].astype(bool))
            scaler.mean_, scaler.scale_ = mean, scale
            scaler.n_features_in_ = n_features
            svc = BalancedSVC(**params)
            svc.support_ = d["support"].astype(np.int64)
            svc.support_vectors_ = d["support_vectors"].astype(np.float64)
            svc.dual_coef_ = d["dual_coef"].astype(np.float64)
            svc.intercept_ = float(d["intercept"])
            svc.probA_, svc.probB_ = float(d["prob_a"]), float(d["prob_b"])
            svc.class_weight_ = d["class_weight"].astype(np.float64)
            svc.converged_ = bool(d["converged"])
            svc.objective_ = float(d["objective"])
            svc.classes_ = classes
            svc.n_features_in_ = n_features
            model = Pipeline([("scale", scaler), ("svc", svc)])
        else:
            raise ValueError(f"{path}: unknown classifier kind {kind!r}")
    if kind == "forest":
        model.classes_ = classes
        model.n_features_in_ = n_features
    return model, names
