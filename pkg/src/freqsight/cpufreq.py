"""CPU frequency control behind one small interface.

The sysfs backend drives the userspace-governor style interface under
``/sys/devices/system/cpu`` (override the root with the
``FREQSIGHT_CPUFREQ_ROOT`` environment variable, e.g. to point CI at a
fake tree); the mock backend is an in-memory substitute honoring the same
contract. Frequencies are handled in GHz and fanned out to all logical
cores, since the measurements scale the whole processor.
"""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Optional

from .errors import FrequencyControlError, UnsupportedFrequencyError
from .model import match_value

CPUFREQ_ROOT_ENV = "FREQSIGHT_CPUFREQ_ROOT"
DEFAULT_SYSFS_ROOT = "/sys/devices/system/cpu"


def _ghz_to_khz(ghz: float) -> int:
    return round(ghz * 1e6)


def _khz_to_ghz(khz: int) -> float:
    return khz / 1e6


class FrequencyController:
    """Interface both backends implement."""

    backend = "abstract"

    @property
    def available_freqs(self) -> tuple[float, ...]:
        raise NotImplementedError

    @property
    def current(self) -> Optional[float]:
        raise NotImplementedError

    def set(self, freq_ghz: float) -> None:
        raise NotImplementedError


class MockFrequencyController(FrequencyController):
    """In-memory controller for tests and dry runs."""

    backend = "mock"

    def __init__(self, available_freqs, current: Optional[float] = None, fail_with: Optional[Exception] = None):
        self._available = tuple(sorted(available_freqs))
        self._current = current
        self._fail_with = fail_with
        self.set_calls: list[float] = []

    @property
    def available_freqs(self):
        return self._available

    @property
    def current(self):
        return self._current

    def set(self, freq_ghz: float) -> None:
        if self._fail_with is not None:
            raise self._fail_with
        self.set_calls.append(freq_ghz)
        self._current = freq_ghz


class SysfsFrequencyController(FrequencyController):
    """Drives cpu*/cpufreq/scaling_setspeed for every logical core.

    Requires the userspace governor (written on demand) and write access
    to the cpufreq files, which usually means root.
    """

    backend = "real-sysfs-interface"

    def __init__(self, root: Optional[str] = None):
        self.root = Path(root or os.environ.get(CPUFREQ_ROOT_ENV) or DEFAULT_SYSFS_ROOT)
        self._current: Optional[float] = None

    def _cpu_dirs(self) -> list[Path]:
        if not self.root.is_dir():
            raise FrequencyControlError(f"cpufreq root {self.root} does not exist")
        dirs = sorted(
            (p for p in self.root.iterdir()
             if re.fullmatch(r"cpu\d+", p.name) and (p / "cpufreq").is_dir()),
            key=lambda p: int(p.name[3:]),
        )
        if not dirs:
            raise FrequencyControlError(f"no cpu*/cpufreq directories under {self.root}")
        return dirs

    def _read(self, path: Path) -> str:
        try:
            return path.read_text().strip()
        except OSError as e:
            raise FrequencyControlError(f"cannot read {path}: {e}") from e

    def _write(self, path: Path, value: str) -> None:
        # Never create files: a missing interface file means the driver
        # does not support this control.
        if not path.exists():
            raise FrequencyControlError(
                f"cannot write {path}: interface file missing "
                "(does the cpufreq driver support the userspace governor?)"
            )
        try:
            path.write_text(value + "\n")
        except OSError as e:
            raise FrequencyControlError(
                f"cannot write {path}: {e} (userspace governor and root privileges required)"
            ) from e

    @property
    def available_freqs(self) -> tuple[float, ...]:
        first = self._cpu_dirs()[0] / "cpufreq" / "scaling_available_frequencies"
        khz = [int(tok) for tok in self._read(first).split()]
        return tuple(sorted(_khz_to_ghz(k) for k in khz))

    @property
    def current(self) -> Optional[float]:
        if self._current is not None:
            return self._current
        cpufreq = self._cpu_dirs()[0] / "cpufreq"
        for name in ("scaling_setspeed", "scaling_cur_freq"):
            path = cpufreq / name
            if path.exists():
                text = self._read(path)
                if text.isdigit():
                    return _khz_to_ghz(int(text))
        return None

    def set(self, freq_ghz: float) -> None:
        khz = _ghz_to_khz(freq_ghz)
        for cpu in self._cpu_dirs():
            cpufreq = cpu / "cpufreq"
            governor = cpufreq / "scaling_governor"
            if self._read(governor) != "userspace":
                self._write(governor, "userspace")
            self._write(cpufreq / "scaling_setspeed", str(khz))
        self._current = freq_ghz

    def read_frequencies(self) -> dict[str, float]:
        """Commanded frequency per logical core."""
        out = {}
        for cpu in self._cpu_dirs():
            path = cpu / "cpufreq" / "scaling_setspeed"
            text = self._read(path)
            if not text.isdigit():
                # "<unsupported>" until the userspace governor is active
                raise FrequencyControlError(
                    f"{path} reports {text!r}; set a frequency first (userspace governor)"
                )
            out[cpu.name] = _khz_to_ghz(int(text))
        return out


def set_cpu_frequency(controller: FrequencyController, freq_ghz: float) -> float:
    """Set ``freq_ghz`` on all logical cores; idempotent.

    The frequency must match one of the controller's available
    frequencies within relative tolerance 1e-6; returns the canonical
    value that was set.
    """
    available = controller.available_freqs
    canonical = match_value(available, freq_ghz)
    if canonical is None:
        pretty = ", ".join(f"{f:g}" for f in available)
        raise UnsupportedFrequencyError(
            f"frequency {freq_ghz:g} GHz is not available; supported: {pretty}",
            available=available,
        )
    controller.set(canonical)
    return canonical
