"""On-disk cache of parity-resolved spectra.

File layout (all integers and floats little-endian)::

    8 bytes   magic b"NTQPTSPC"
    uint32    format version
    uint64    header length L
    L bytes   UTF-8 JSON header: {"spec": {...}, "sectors": [{"parity": p, "size": d}, ...]}
    per sector, in header order:
        d float64        eigenvalues
        d*d float64      eigenvectors, row-major, in the sector basis

Entries are named by the SHA-256 of the canonical spec JSON. They are written
once through an atomic rename and never modified afterwards; a hit whose stored
spec differs from the request is treated as a miss.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .models import ModelSpec
from .spectral import ParitySector, ParitySpectrum, parity_sectors

log = logging.getLogger(__name__)

MAGIC = b"NTQPTSPC"
VERSION = 1
ENV_VAR = "NTQPT_CACHE_DIR"


def spec_hash(spec: ModelSpec) -> str:
    payload = json.dumps({"version": VERSION, "spec": spec.key()}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


class SpectrumCache:
    def __init__(self, directory):
        self.directory = Path(directory)

    @classmethod
    def from_env(cls, directory=None):
        """Explicit directory, else ``$NTQPT_CACHE_DIR``, else no cache."""
        directory = directory or os.environ.get(ENV_VAR)
        return cls(directory) if directory else None

    def path(self, spec: ModelSpec) -> Path:
        return self.directory / f"{spec_hash(spec)}.spc"

    def get(self, spec: ModelSpec) -> ParitySpectrum | None:
        path = self.path(spec)
        if not path.exists():
            return None
        with open(path, "rb") as fh:
            if fh.read(8) != MAGIC:
                log.warning("ignoring %s: bad magic", path)
                return None
            version, hlen = struct.unpack("<IQ", fh.read(12))
            if version != VERSION:
                return None
            header = json.loads(fh.read(hlen).decode())
            if header["spec"] != spec.key():
                log.warning("cache collision at %s; recomputing", path)
                return None
            bases = parity_sectors(spec)
            sectors = {}
            for entry in header["sectors"]:
                p, d = int(entry["parity"]), int(entry["size"])
                w = np.frombuffer(fh.read(8 * d), dtype="<f8").astype(float)
                v = np.frombuffer(fh.read(8 * d * d), dtype="<f8").astype(float).reshape(d, d)
                w.setflags(write=False)
                v.setflags(write=False)
                sectors[p] = ParitySector(p, bases[p], w, v)
        return ParitySpectrum(spec, sectors)

    def put(self, spectrum: ParitySpectrum) -> Path:
        spec = spectrum.spec
        path = self.path(spec)
        if path.exists():
            return path
        self.directory.mkdir(parents=True, exist_ok=True)
        order = (1, -1)
        header = json.dumps({"spec": spec.key(),
                             "sectors": [{"parity": p, "size": len(spectrum.sectors[p])} for p in order]},
                            sort_keys=True).encode()
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(MAGIC)
                fh.write(struct.pack("<IQ", VERSION, len(header)))
                fh.write(header)
                for p in order:
                    sec = spectrum.sectors[p]
                    fh.write(np.ascontiguousarray(sec.energies, dtype="<f8").tobytes())
                    fh.write(np.ascontiguousarray(sec.vectors, dtype="<f8").tobytes())
            if path.exists():
                os.unlink(tmp)
            else:
                os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path
