# Tolerance and report-setting management
import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from utils.log import get_logger

log = get_logger("cfg")


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used across the pipeline."""
    relative: float = 1e-11
    absolute: float = 1e-12
    hermitian: float = 1e-12
    imag_residue: float = 1e-12
    representation: float = 1e-10
    eigen_reconstruction: float = 1e-9
    unitarity: float = 1e-10
    cluster: float = 1e-10
    group: float = 1e-10
    basis_rank: float = 1e-8
    csb_slack: float = 1e-10

    def scaled(self, factor: float) -> "Tolerances":
        return Tolerances(**{f.name: getattr(self, f.name) * factor for f in fields(self)})

    def merged(self, overrides: Optional[dict]) -> "Tolerances":
        """Return a copy with the given fields replaced; unknown keys are rejected."""
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ValueError(f"unknown tolerance fields: {', '.join(unknown)}")
        values = {}
        for name, value in overrides.items():
            value = float(value)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"tolerance {name} must be positive and finite, got {value!r}")
            values[name] = value
        return replace(self, **values)


DEFAULT_TOLERANCES = Tolerances()


def resolve(tol: Optional[Tolerances]) -> Tolerances:
    return DEFAULT_TOLERANCES if tol is None else tol


class ParameterManager:
    # Check config/ first, then the current directory
    _CONFIG_DIR = Path(__file__).parent.parent / "config"
    PARAM_FILE = "params.json"
    APP_FILES = ("app.local.json", "app.sample.json")

    def __init__(self, config_dir: Optional[Path] = None):
        if config_dir is not None:
            self._CONFIG_DIR = Path(config_dir)

    def _find_param_file(self, file_path: Optional[str] = None) -> Path:
        """Find params.json in config/ directory first, then fallback to current directory."""
        if file_path:
            return Path(file_path)
        config_file = self._CONFIG_DIR / self.PARAM_FILE
        if config_file.exists():
            return config_file
        return Path(self.PARAM_FILE)

    def file_exists(self, file_path: Optional[str] = None) -> bool:
        return self._find_param_file(file_path).exists()

    def _read(self, path: Path) -> Optional[dict]:
        try:
            with open(path, "r") as file:
                return json.load(file)
        except json.JSONDecodeError as e:
            log.warning("failed to decode %s: %s", path, e)
        except OSError as e:
            log.warning("failed to read %s: %s", path, e)
        return None

    def validate_params(self, file_path: Optional[str] = None) -> bool:
        """Every tolerance present in the file must be a known, positive, finite number."""
        path = self._find_param_file(file_path)
        if not path.exists():
            return False
        params = self._read(path)
        if not isinstance(params, dict):
            return False
        try:
            DEFAULT_TOLERANCES.merged(params.get("tolerances", {}))
        except (TypeError, ValueError) as e:
            log.warning("invalid tolerances in %s: %s", path, e)
            return False
        return True

    def get_param(self, param_name: str, file_path: Optional[str] = None):
        path = self._find_param_file(file_path)
        if self.validate_params(str(path)):
            return self._read(path).get(param_name)
        return None

    def tolerances(self, file_path: Optional[str] = None) -> Tolerances:
        """Tolerances from params.json, or the built-in defaults when the file is missing or invalid."""
        path = self._find_param_file(file_path)
        if not self.validate_params(str(path)):
            log.warning("%s missing or invalid, using built-in tolerances", path)
            return DEFAULT_TOLERANCES
        return DEFAULT_TOLERANCES.merged(self._read(path).get("tolerances", {}))

    def app_settings(self) -> dict:
        """Report settings from app.local.json, else app.sample.json, else empty."""
        for name in self.APP_FILES:
            path = self._CONFIG_DIR / name
            if path.exists():
                settings = self._read(path)
                if isinstance(settings, dict):
                    return settings
        return {}


if __name__ == "__main__":
    manager = ParameterManager()
    print(f"Parameter file: {manager._find_param_file()}")
    for f in fields(Tolerances):
        print(f"{f.name:>22}: {getattr(manager.tolerances(), f.name):.1e}")
