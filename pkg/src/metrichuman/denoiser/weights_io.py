"""Self-describing weights file.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header listing every
tensor's name, shape and value offset, then all values as little-endian float64.
"""

import json
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np
import torch

from ..core.error_handler import FormatError
from .model import DenoiserConfig, MotionDiscriminator, SceneAwareDenoiser

logger = logging.getLogger(__name__)

WEIGHTS_FORMAT = "metrichuman-weights"
WEIGHTS_VERSION = 1
_HEADER_BYTES = 8


def save_weights(
    path: Union[str, Path],
    tensors: Mapping[str, torch.Tensor],
    metadata: Optional[Dict[str, Any]] = None,
) -> None:
    """Write named tensors (and optional JSON metadata) to a weights file."""
    entries = []
    chunks = []
    offset = 0
    for name, tensor in tensors.items():
        values = tensor.detach().cpu().to(torch.float64).numpy().reshape(-1)
        entries.append({"name": name, "shape": list(tensor.shape), "offset": offset})
        chunks.append(values.astype("<f8").tobytes())
        offset += values.size
    header = json.dumps(
        {
            "format": WEIGHTS_FORMAT,
            "version": WEIGHTS_VERSION,
            "tensors": entries,
            "metadata": metadata or {},
        },
        sort_keys=True,
    ).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(len(header).to_bytes(_HEADER_BYTES, "little"))
        f.write(header)
        for chunk in chunks:
            f.write(chunk)
    logger.info(f"Saved {len(entries)} tensors ({offset} values) to {path}")


def load_weights(path: Union[str, Path]) -> Tuple["OrderedDict[str, torch.Tensor]", Dict[str, Any]]:
    """Read a weights file.

    Returns:
        Tuple of (float64 tensors by name, metadata)

    Raises:
        FormatError: If the file is truncated or its header is malformed
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER_BYTES:
        raise FormatError("Weights file is truncated", file_path=str(path))
    size = int.from_bytes(blob[:_HEADER_BYTES], "little")
    try:
        header = json.loads(blob[_HEADER_BYTES : _HEADER_BYTES + size].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"Weights header is not valid JSON: {e}", file_path=str(path))
    if header.get("format") != WEIGHTS_FORMAT:
        raise FormatError(f"Not a weights file: format {header.get('format')!r}", file_path=str(path))

    values = np.frombuffer(blob[_HEADER_BYTES + size :], dtype="<f8")
    tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start = int(entry["offset"])
        if start + count > values.size:
            raise FormatError(f"Tensor {entry['name']} runs past the end of the file", file_path=str(path))
        data = values[start : start + count].reshape(entry["shape"]).astype(np.float64)
        tensors[entry["name"]] = torch.from_numpy(data)
    return tensors, header.get("metadata", {})


def save_model(
    path: Union[str, Path],
    model: SceneAwareDenoiser,
    discriminator: Optional[MotionDiscriminator] = None,
) -> None:
    """Store denoiser (and discriminator) parameters with the network config."""
    tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
    for name, tensor in model.state_dict().items():
        tensors[f"denoiser.{name}"] = tensor
    if discriminator is not None:
        for name, tensor in discriminator.state_dict().items():
            tensors[f"discriminator.{name}"] = tensor
    save_weights(path, tensors, {"config": model.config.to_dict()})


def load_model(
    path: Union[str, Path], config: Optional[DenoiserConfig] = None
) -> Tuple[SceneAwareDenoiser, Optional[MotionDiscriminator]]:
    """Rebuild the denoiser from a weights file.

    The stored network config wins over `config` for architecture fields.

    Raises:
        FormatError: If tensors are missing or mis-shaped
    """
    tensors, metadata = load_weights(path)
    stored = metadata.get("config")
    if stored is not None:
        base = config.to_dict() if config is not None else {}
        base.update(stored)
        config = DenoiserConfig.from_dict(base)
    model = SceneAwareDenoiser(config)
    own = {k[len("denoiser.") :]: v for k, v in tensors.items() if k.startswith("denoiser.")}
    try:
        model.load_state_dict({k: v.to(torch.float32) for k, v in own.items()})
    except RuntimeError as e:
        raise FormatError(f"Weights do not match the denoiser: {e}", file_path=str(path))

    disc_tensors = {
        k[len("discriminator.") :]: v.to(torch.float32)
        for k, v in tensors.items()
        if k.startswith("discriminator.")
    }
    discriminator = None
    if disc_tensors:
        discriminator = MotionDiscriminator(model.num_joints)
        try:
            discriminator.load_state_dict(disc_tensors)
        except RuntimeError as e:
            raise FormatError(f"Weights do not match the discriminator: {e}", file_path=str(path))
    logger.info(f"Loaded denoiser weights from {path}")
    return model, discriminator
