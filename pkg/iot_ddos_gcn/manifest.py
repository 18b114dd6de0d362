from typing import Dict, List, Union
import hashlib
import json
import logging
from pathlib import Path

from dataclasses import asdict, dataclass, field

import yaml

import iot_ddos_gcn


logger = logging.getLogger(__name__)


MANIFEST_FILE = 'manifest.yaml'
STATUS_OK = 'ok'


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            digest.update(block)
    return digest.hexdigest()


def config_hash(config) -> str:
    """sha256 of the canonical JSON form of an ExperimentConfig"""
    return sha256_hex(json.dumps(config.to_dict(), sort_keys=True, default=str).encode('utf-8'))


@dataclass
class RunManifest:
    """
    Record of a run directory: what produced it and the checksum of every artifact

    Artifact paths are relative to the run directory.
    """
    config_hash: str
    seed: int
    version: str = iot_ddos_gcn.__version__
    cells: Dict[str, str] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def load(cls, out_dir: Union[str, Path]):
        with open(Path(out_dir) / MANIFEST_FILE, 'r') as f:
            data = yaml.safe_load(f)
        return cls(**data)

    @classmethod
    def load_or_create(cls, out_dir: Union[str, Path], config_hash: str, seed: int):
        """Reuses the existing manifest when it belongs to the same config and seed"""
        path = Path(out_dir) / MANIFEST_FILE
        if path.exists():
            manifest = cls.load(out_dir)
            if manifest.config_hash == config_hash and manifest.seed == seed:
                return manifest
            logger.warning(f"{path} belongs to another config or seed; starting a new manifest")
        return cls(config_hash=config_hash, seed=seed)

    def add_artifact(self, out_dir: Union[str, Path], path: Union[str, Path]):
        out_dir = Path(out_dir).resolve()
        path = Path(path).resolve()
        relative = path.relative_to(out_dir).as_posix()
        self.artifacts[relative] = file_sha256(path)

    def failed_cells(self) -> List[str]:
        return sorted(cell for cell, status in self.cells.items() if status != STATUS_OK)

    def verify(self, out_dir: Union[str, Path]) -> List[str]:
        """Artifacts that are missing or whose checksum changed"""
        problems = []
        for relative, checksum in sorted(self.artifacts.items()):
            path = Path(out_dir) / relative
            if not path.exists():
                problems.append(f"{relative}: missing")
            elif file_sha256(path) != checksum:
                problems.append(f"{relative}: checksum mismatch")
        return problems

    def write(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / MANIFEST_FILE
        data = asdict(self)
        data['cells'] = dict(sorted(self.cells.items()))
        data['artifacts'] = dict(sorted(self.artifacts.items()))
        data['timings'] = {key: float(value) for key, value in sorted(self.timings.items())}
        with open(path, 'w') as f:
            yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
        return path
