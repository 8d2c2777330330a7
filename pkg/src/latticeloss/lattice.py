"""Alignment-lattice data model, construction from raw logits, and
serialization.

A lattice holds, for one utterance of ``T`` encoder frames and ``U``
transcript tokens, the per-node log-probabilities of the two transitions:
``y[t, u]`` emits token ``u`` (advancing the token axis) and
``blank[t, u]`` emits blank (advancing the frame axis). ``blank[T-1, U]``
terminates a path; the remaining last-frame blank entries are stored but
unreachable.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"LTC1"


class LatticeFormatError(ValueError):
    """Raised for malformed or inconsistent serialized lattices."""


def _as_grid(arr, name: str, allow_empty_cols: bool) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must have at least one frame")
    if arr.shape[1] < 1 and not allow_empty_cols:
        raise ValueError(f"{name} must have at least one column")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Lattice:
    """Per-node transition log-probabilities for one utterance.

    Attributes:
      y: (T, U) grid; ``y[t, u]`` is the log-probability of emitting token
        ``u`` from node (t, u).
      blank: (T, U+1) grid; ``blank[t, u]`` is the log-probability of
        emitting blank at frame t having emitted u tokens.
      normalized: informational flag; True when the entries came from a
        softmax over a shared vocabulary. Never gates any computation:
        penalized lattices (entries possibly > 0) are legal inputs
        everywhere.

    Immutable after construction (grids are read-only), so instances are
    safe to share across threads.
    """

    y: np.ndarray
    blank: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        y = _as_grid(self.y, "y", allow_empty_cols=True)
        blank = _as_grid(self.blank, "blank", allow_empty_cols=False)
        if blank.shape != (y.shape[0], y.shape[1] + 1):
            raise ValueError(
                f"blank grid must be (T, U+1)=({y.shape[0]}, {y.shape[1] + 1}), "
                f"got {blank.shape}"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "blank", blank)

    @property
    def num_frames(self) -> int:
        return self.blank.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class TokenizedUtterance:
    """Transcript tokens plus the raw per-node scores they were decoded from.

    ``logits[t, u, v]`` scores vocabulary entry v at node (t, u); the
    vocabulary of size V includes the blank token at index ``blank_id``.
    """

    tokens: np.ndarray
    blank_id: int
    logits: np.ndarray

    def __post_init__(self):
        tokens = np.ascontiguousarray(self.tokens, dtype=np.int64)
        logits = np.ascontiguousarray(self.logits, dtype=np.float64)
        if tokens.ndim != 1:
            raise ValueError(f"tokens must be 1-D, got shape {tokens.shape}")
        if logits.ndim != 3:
            raise ValueError(f"logits must be 3-D, got shape {logits.shape}")
        T, U1, V = logits.shape
        if V < 2:
            raise ValueError(f"vocabulary size must be >= 2, got {V}")
        if not 0 <= self.blank_id < V:
            raise ValueError(f"blank_id {self.blank_id} out of range [0, {V})")
        if U1 != len(tokens) + 1:
            raise ValueError(
                f"logits token axis must be U+1={len(tokens) + 1}, got {U1}"
            )
        if tokens.size:
            if tokens.min() < 0 or tokens.max() >= V:
                raise ValueError("token id out of range")
            if (tokens == self.blank_id).any():
                raise ValueError("tokens must not contain blank_id")
        if logits.size and not np.isfinite(logits).all():
            raise ValueError("logits contain non-finite entries")
        tokens.setflags(write=False)
        logits.setflags(write=False)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "logits", logits)

    @property
    def num_frames(self) -> int:
        return self.logits.shape[0]

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    @property
    def vocab_size(self) -> int:
        return self.logits.shape[2]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax over the last axis."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def lattice_from_logits(utt: TokenizedUtterance) -> Lattice:
    """Normalize raw node scores into a lattice.

    Each node's logits are put through one joint softmax over the whole
    vocabulary; the lattice keeps the entries for the reference token and
    for blank.
    """
    logprobs = log_softmax(utt.logits)
    U = utt.num_tokens
    y = logprobs[:, :U, :][:, np.arange(U), utt.tokens] if U else np.zeros(
        (utt.num_frames, 0)
    )
    blank = logprobs[:, :, utt.blank_id]
    return Lattice(y=y, blank=blank, normalized=True)


def _format_grid(grid: np.ndarray) -> str:
    # 17 significant digits guarantees exact binary64 round-trip through text.
    return "[" + ", ".join(format(x, ".17g") for x in grid.ravel()) + "]"


def write_lattice(lat: Lattice, binary: bool = False) -> bytes:
    """Serialize a lattice.

    JSON mode writes numbers with 17 significant digits; binary mode
    round-trips bit-exactly. The binary layout carries no ``normalized``
    flag, so reading it yields ``normalized=False``.
    """
    T, U = lat.num_frames, lat.num_tokens
    if binary:
        return (
            struct.pack("<4sII", MAGIC, T, U)
            + lat.y.astype("<f8").tobytes()
            + lat.blank.astype("<f8").tobytes()
        )
    doc = (
        "{"
        f'"T": {T}, "U": {U}, '
        f'"normalized": {"true" if lat.normalized else "false"}, '
        f'"y": {_format_grid(lat.y)}, '
        f'"blank": {_format_grid(lat.blank)}'
        "}"
    )
    return doc.encode("utf-8")


def read_lattice(data: bytes) -> Lattice:
    """Parse a lattice from either serialization format."""
    if data[:4] == MAGIC:
        return _read_binary(data)
    return _read_json(data)


def _read_binary(data: bytes) -> Lattice:
    header = struct.calcsize("<4sII")
    if len(data) < header:
        raise LatticeFormatError("truncated binary lattice header")
    _, T, U = struct.unpack_from("<4sII", data)
    expected = header + 8 * (T * U + T * (U + 1))
    if len(data) != expected:
        raise LatticeFormatError(
            f"binary lattice should be {expected} bytes for T={T}, U={U}, "
            f"got {len(data)}"
        )
    if T < 1:
        raise LatticeFormatError("T must be >= 1")
    body = np.frombuffer(data, dtype="<f8", offset=header)
    y = body[: T * U].reshape(T, U)
    blank = body[T * U :].reshape(T, U + 1)
    try:
        return Lattice(y=y, blank=blank, normalized=False)
    except ValueError as exc:
        raise LatticeFormatError(str(exc)) from exc


def _read_json(data: bytes) -> Lattice:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LatticeFormatError(f"malformed lattice document: {exc}") from exc
    if not isinstance(doc, dict):
        raise LatticeFormatError("lattice document must be a JSON object")
    for key in ("T", "U", "y", "blank", "normalized"):
        if key not in doc:
            raise LatticeFormatError(f"missing field {key!r}")
    T, U = doc["T"], doc["U"]
    if not isinstance(T, int) or not isinstance(U, int) or T < 1 or U < 0:
        raise LatticeFormatError(f"invalid dimensions T={T!r}, U={U!r}")
    if not isinstance(doc["normalized"], bool):
        raise LatticeFormatError("'normalized' must be a boolean")
    y = np.asarray(doc["y"], dtype=np.float64)
    blank = np.asarray(doc["blank"], dtype=np.float64)
    if y.size != T * U or blank.size != T * (U + 1):
        raise LatticeFormatError(
            f"grid sizes do not match T={T}, U={U}: "
            f"len(y)={y.size}, len(blank)={blank.size}"
        )
    try:
        return Lattice(
            y=y.reshape(T, U),
            blank=blank.reshape(T, U + 1),
            normalized=doc["normalized"],
        )
    except ValueError as exc:
        raise LatticeFormatError(str(exc)) from exc
