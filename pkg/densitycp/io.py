"""Artifact files.

Every artifact a subcommand writes goes through an :class:`ArtifactWriter`, which records its
SHA-256 and finally writes ``manifest.json`` next to it. CSV files start with one ``#`` line
holding the embedded configuration as JSON and print floats with 17 significant digits, so
any file can be regenerated byte for byte from that line. JSON artifacts carry the same
configuration under a top-level ``"config"`` key. Occupancy dumps and rasters keep the
format :func:`densitycp.lattice.load_occupancy` and image readers expect; the manifest
is the configuration record for them.
"""
import csv
import hashlib
import json
import logging
import math
import os

import numpy as np

from densitycp import __version__
from densitycp.config import embedded
from densitycp.engine import write_raster
from densitycp.replicates import RNG_FAMILY

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def format_value(value):
    """Text of one CSV cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, np.integer):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def config_comment(config):
    return "# " + json.dumps(embedded(config), sort_keys=True, separators=(",", ":"))


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactWriter:
    """Writes the artifacts of one run into ``directory``.

    Args:
        directory (str): target directory, created when missing
        config (dict): resolved configuration
    """

    def __init__(self, directory, config):
        self.directory = str(directory)
        self.config = config
        self.artifacts = {}
        os.makedirs(self.directory, exist_ok=True)

    def path(self, name):
        return os.path.join(self.directory, name)

    def _register(self, name):
        self.artifacts[name] = sha256_file(self.path(name))
        logger.info("wrote %s", self.path(name))
        return self.path(name)

    def csv(self, name, header, rows):
        """CSV with the configuration comment, a header row and one line per row."""
        with open(self.path(name), "w", newline="") as f:
            f.write(config_comment(self.config) + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
        return self._register(name)

    def json(self, name, payload):
        """JSON object with the embedded configuration added under ``"config"``."""
        payload = dict(payload, config=embedded(self.config))
        with open(self.path(name), "w") as f:
            json.dump(payload, f, sort_keys=True, indent=2)
            f.write("\n")
        return self._register(name)

    def text(self, name, content):
        with open(self.path(name), "w") as f:
            f.write(content)
        return self._register(name)

    def raster(self, name, image):
        write_raster(image, self.path(name))
        return self._register(name)

    def manifest(self):
        """Write ``manifest.json``: config, seed, RNG family, version and artifact hashes."""
        payload = {
            "config": embedded(self.config),
            "seed": self.config["seed"],
            "rng": RNG_FAMILY,
            "version": __version__,
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        with open(self.path(MANIFEST), "w") as f:
            json.dump(payload, f, sort_keys=True, indent=2)
            f.write("\n")
        return self.path(MANIFEST)


def read_config_comment(path):
    """Embedded configuration of a CSV artifact."""
    with open(path) as f:
        first = f.readline()
    if not first.startswith("# "):
        raise ValueError("{} has no configuration line".format(path))
    return json.loads(first[2:])
