import json
import os
from pathlib import Path

_here = Path(__file__).resolve().parent
if "BARRIERFORGE_FIXTURES" not in os.environ and (_here / "data" / "fixtures").is_dir():
    os.environ["BARRIERFORGE_FIXTURES"] = str(_here / "data" / "fixtures")

from ._barrierforge import (  # noqa: E402
    CollectionError,
    CompositionFailed,
    CompositionRefused,
    ConditioningError,
    InfeasibleError,
    MissingArtifact,
    RetryExhausted,
    SdpProblem,
    benchmark_names,
    default_fixture_dir,
    lanczos_max_dense,
    solve_sdp,
    sos_check,
)
from . import _barrierforge as _core  # noqa: E402

__all__ = [
    "CollectionError",
    "CompositionFailed",
    "CompositionRefused",
    "ConditioningError",
    "InfeasibleError",
    "MissingArtifact",
    "RetryExhausted",
    "SdpProblem",
    "benchmark_names",
    "compose",
    "default_fixture_dir",
    "lanczos_max_dense",
    "load_fixture",
    "solve_sdp",
    "sos_check",
    "synth",
    "verify",
]


def load_fixture(name, fixture_dir=""):
    return json.loads(_core.load_fixture_json(name, str(fixture_dir)))


def synth(config, out_dir=""):
    return json.loads(_core.synth_json(str(config), str(out_dir)))


def compose(certs_dir, topology="", out_path=""):
    return json.loads(_core.compose_json(str(certs_dir), str(topology), str(out_path)))


def verify(target="fixture", benchmark="", certs_dir="", slack=0.01, points=0):
    return json.loads(_core.verify_json(target, benchmark, str(certs_dir), slack, points))
