"""Model checkpoint files: self-describing JSON, value-exact round trips.

JSON floats are written with `repr`, which preserves every double exactly on
reload (shortest round-trip representation, at most 17 significant digits).
"""

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .network import ModelParams, NetworkTopology, TrainingConfig
from .training import TrainedModel, TrainingReport

FORMAT_NAME = "privout-model"
FORMAT_VERSION = 1


def save_model(model, path):
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "topology": {
            "layer_sizes": list(model.topology.layer_sizes),
            "hidden_activation": model.topology.hidden_activation,
            "output_activation": model.topology.output_activation,
        },
        "weights": model.params.flatten().tolist(),
        "layer_abs_max": [float(x) for x in model.layer_abs_max],
        "training_config": asdict(model.config),
        "report": asdict(model.report),
        "train_size": model.train_size,
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_model(path):
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    if payload.get("format") != FORMAT_NAME:
        raise DataFormatError(f"{path}: not a {FORMAT_NAME} file")
    if payload.get("version") != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported version {payload.get('version')}")
    topo = payload["topology"]
    topology = NetworkTopology(
        layer_sizes=tuple(topo["layer_sizes"]),
        hidden_activation=topo["hidden_activation"],
        output_activation=topo["output_activation"],
    )
    params = ModelParams.from_flat(np.array(payload["weights"]), topology)
    return TrainedModel(
        topology=topology,
        params=params,
        layer_abs_max=list(payload["layer_abs_max"]),
        config=TrainingConfig(**payload["training_config"]),
        report=TrainingReport(**payload["report"]),
        train_size=int(payload["train_size"]),
    )
