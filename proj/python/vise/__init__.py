"""Shape estimation for a three-section continuum arm from two camera views."""

import json

from ._vise import (
    Model,
    WeightFileError,
    fk_chain,
    key_points,
    run_cli,
)
from . import _vise

__all__ = [
    "Model",
    "WeightFileError",
    "desk_config",
    "fk_chain",
    "key_points",
    "lr_at",
    "preprocess",
    "render_view",
    "run_cli",
]


def desk_config(seed=7):
    return json.loads(_vise.desk_config_json(seed))


def render_view(scene, camera, sections):
    return _vise.render_view(json.dumps(scene), camera, sections)


def preprocess(image, spec, camera):
    return _vise.preprocess(image, json.dumps(spec), camera)


def lr_at(train, epoch):
    return _vise.lr_at(json.dumps(train), epoch)
