"""Black-box decision oracles with query accounting.

An oracle labels a point adversarial or benign.  ``query`` increments the
query counter exactly once per call; ``decide`` is the same function without
accounting and exists only for harness setup (example screening, fallback
selection) and analysis.  Oracles are immutable after construction except
for the counter, which is lock-protected.
"""

from __future__ import annotations

import threading

import numpy as np

from . import kernels

__all__ = [
    "DecisionOracle", "HalfspaceOracle", "SphereOracle", "MlpOracle",
    "load_mlp", "random_mlp", "parse_oracle_spec", "MlpFormatError",
]


class DecisionOracle:
    dim: int

    def __init__(self):
        self._lock = threading.Lock()
        self._queries = 0

    @property
    def queries(self) -> int:
        return self._queries

    def add_queries(self, n: int) -> None:
        with self._lock:
            self._queries += n

    def reset_counter(self) -> None:
        with self._lock:
            self._queries = 0

    def query(self, x) -> bool:
        """Label a point and count one query. True means adversarial."""
        self.add_queries(1)
        return self.decide(x)

    def decide(self, x) -> bool:
        raise NotImplementedError

    def _check_dim(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"oracle expects dimension {self.dim}, got shape {x.shape}")
        return x

    def kernel_params(self):
        """(kind, vector, scalar, side) for the compiled attack loop, or None."""
        return None

    def optimal_distance(self, x0) -> float | None:
        """Distance from a benign x0 to the decision boundary, if known analytically."""
        return None


class HalfspaceOracle(DecisionOracle):
    """Adversarial iff w.x + b > 0."""

    def __init__(self, w, b: float):
        super().__init__()
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)
        if self.w.ndim != 1 or not np.linalg.norm(self.w) > 0:
            raise ValueError("w must be a nonzero vector")
        self.dim = len(self.w)

    def decide(self, x) -> bool:
        x = self._check_dim(x)
        return bool(kernels.seq_dot(self.w, x) + self.b > 0.0)

    def kernel_params(self):
        return (kernels.ORACLE_HALFSPACE, self.w, self.b, 0)

    def optimal_distance(self, x0) -> float:
        x0 = self._check_dim(x0)
        return abs(float(np.dot(self.w, x0)) + self.b) / float(np.linalg.norm(self.w))


class SphereOracle(DecisionOracle):
    """Adversarial on one side of a sphere; boundary points are benign."""

    def __init__(self, center, radius: float, adversarial_side: str = "outside"):
        super().__init__()
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if adversarial_side not in ("inside", "outside"):
            raise ValueError("adversarial_side must be 'inside' or 'outside'")
        self.adversarial_side = adversarial_side
        self.dim = len(self.center)

    def decide(self, x) -> bool:
        x = self._check_dim(x)
        d = float(kernels.l2_dist(x, self.center))
        return d > self.radius if self.adversarial_side == "outside" else d < self.radius

    def kernel_params(self):
        side = 1 if self.adversarial_side == "outside" else -1
        return (kernels.ORACLE_SPHERE, self.center, self.radius, side)

    def optimal_distance(self, x0) -> float:
        x0 = self._check_dim(x0)
        return abs(self.radius - float(np.linalg.norm(x0 - self.center)))


class MlpOracle(DecisionOracle):
    """Feedforward classifier: affine layers with ReLU between, argmax at the end.

    Adversarial iff the predicted label differs from the recorded benign label.
    """

    def __init__(self, layers: list[tuple[np.ndarray, np.ndarray]], benign_label: int):
        super().__init__()
        if not layers:
            raise ValueError("at least one layer required")
        for i in range(1, len(layers)):
            if layers[i][0].shape[1] != layers[i - 1][0].shape[0]:
                raise ValueError(f"layer {i} input size {layers[i][0].shape[1]} does not match "
                                 f"layer {i - 1} output size {layers[i - 1][0].shape[0]}")
        self.layers = [(np.asarray(W, dtype=np.float64), np.asarray(bv, dtype=np.float64))
                       for W, bv in layers]
        n_classes = self.layers[-1][0].shape[0]
        if not 0 <= benign_label < n_classes:
            raise ValueError(f"benign label {benign_label} out of range for {n_classes} classes")
        self.benign_label = int(benign_label)
        self.dim = self.layers[0][0].shape[1]
        widths = [self.dim] + [W.shape[0] for W, _ in self.layers]
        parts = [np.array([len(self.layers), self.benign_label], dtype=np.float64),
                 np.asarray(widths, dtype=np.float64)]
        for W, bv in self.layers:
            parts.append(W.ravel())
            parts.append(bv)
        self._packed = np.concatenate(parts)

    def scores(self, x) -> np.ndarray:
        x = self._check_dim(x)
        for i, (W, bv) in enumerate(self.layers):
            x = W @ x + bv
            if i < len(self.layers) - 1:
                x = np.maximum(x, 0.0)
        return x

    def decide(self, x) -> bool:
        # routed through the compiled forward pass so the python and kernel
        # attack paths see bitwise-identical labels
        x = self._check_dim(x)
        return bool(kernels.oracle_decide(kernels.ORACLE_MLP, self._packed, 0.0, 0, x))

    def kernel_params(self):
        return (kernels.ORACLE_MLP, self._packed, 0.0, 0)


class MlpFormatError(ValueError):
    pass


def load_mlp(path: str, benign_label: int = 0) -> MlpOracle:
    """Load the textual weight format.

    ``layers: k`` header, then per layer a ``rows cols`` line, ``rows`` lines
    of ``cols`` weights (row-major) and one bias line of ``rows`` floats.
    """
    with open(path, "rb") as f:
        data = f.read()
    tokens: list[tuple[bytes, int]] = []  # (token, byte offset)
    offset = 0
    for line in data.split(b"\n"):
        body = line.split(b"#", 1)[0]
        col = 0
        for tok in body.split():
            col = body.find(tok, col)
            tokens.append((tok, offset + col))
            col += len(tok)
        offset += len(line) + 1
    pos = 0

    def take(what: str) -> tuple[bytes, int]:
        nonlocal pos
        if pos >= len(tokens):
            raise MlpFormatError(f"{path}: truncated file, expected {what} at byte offset {len(data)}")
        tok = tokens[pos]
        pos += 1
        return tok

    def take_int(what: str) -> int:
        tok, off = take(what)
        try:
            return int(tok)
        except ValueError:
            raise MlpFormatError(f"{path}: expected {what}, got {tok!r} at byte offset {off}") from None

    def take_float(what: str) -> float:
        tok, off = take(what)
        try:
            return float(tok)
        except ValueError:
            raise MlpFormatError(f"{path}: expected {what}, got {tok!r} at byte offset {off}") from None

    header, off = take("'layers:' header")
    if header != b"layers:":
        raise MlpFormatError(f"{path}: expected 'layers:' header at byte offset {off}")
    n_layers = take_int("layer count")
    if n_layers < 1:
        raise MlpFormatError(f"{path}: layer count must be >= 1")
    layers = []
    for li in range(n_layers):
        rows = take_int(f"layer {li} rows")
        cols = take_int(f"layer {li} cols")
        if rows < 1 or cols < 1:
            raise MlpFormatError(f"{path}: layer {li} has invalid shape {rows}x{cols}")
        W = np.empty((rows, cols))
        for r in range(rows):
            for c in range(cols):
                W[r, c] = take_float(f"layer {li} weight [{r},{c}]")
        bv = np.array([take_float(f"layer {li} bias [{r}]") for r in range(rows)])
        layers.append((W, bv))
    if pos != len(tokens):
        raise MlpFormatError(f"{path}: trailing data at byte offset {tokens[pos][1]}")
    try:
        return MlpOracle(layers, benign_label)
    except ValueError as exc:
        raise MlpFormatError(f"{path}: {exc}") from None


def random_mlp(dim: int, hidden, n_classes: int = 2, seed: int = 0,
               benign_label: int = 0, spread: float = 0.0) -> MlpOracle:
    """Gaussian-initialized ReLU network (weights scaled by 1/sqrt(fan_in)).

    ``spread`` recenters the network on a random point of that scale (folded
    into the first-layer bias), so the origin plays no special role in the
    decision boundary.
    """
    from .rng import stream
    rng = stream(seed, "randmlp")
    center = rng.standard_normal(dim) * spread
    layers = []
    n_in = dim
    for n_out in list(hidden) + [n_classes]:
        W = rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
        bv = rng.standard_normal(n_out) * 0.1
        if not layers:
            bv = bv - W @ center
        layers.append((W, bv))
        n_in = n_out
    return MlpOracle(layers, benign_label)


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",")], dtype=np.float64)


def parse_oracle_spec(spec: str) -> DecisionOracle:
    """CLI oracle strings.

    ``halfspace:w=...;b=...``, ``sphere:c=...;r=...;adv=inside|outside``,
    ``mlp:path=...;benign=<label>``, ``randmlp:dim=...;hidden=h1,h2;
    classes=...;seed=...;benign=<label>``.  Vectors are comma-separated floats.
    """
    kind, _, rest = spec.partition(":")
    fields = {}
    for part in rest.split(";"):
        if part:
            key, _, value = part.partition("=")
            fields[key.strip()] = value.strip()
    try:
        if kind == "halfspace":
            return HalfspaceOracle(_parse_vector(fields["w"]), float(fields.get("b", "0")))
        if kind == "sphere":
            return SphereOracle(_parse_vector(fields["c"]), float(fields["r"]),
                                fields.get("adv", "outside"))
        if kind == "mlp":
            return load_mlp(fields["path"], int(fields.get("benign", "0")))
        if kind == "randmlp":
            hidden = [int(h) for h in fields.get("hidden", "32").split(",") if h]
            return random_mlp(int(fields["dim"]), hidden,
                              n_classes=int(fields.get("classes", "2")),
                              seed=int(fields.get("seed", "0")),
                              benign_label=int(fields.get("benign", "0")),
                              spread=float(fields.get("spread", "0")))
    except KeyError as exc:
        raise ValueError(f"oracle spec {spec!r} is missing field {exc}") from None
    raise ValueError(f"unknown oracle kind {kind!r} "
                     "(expected halfspace, sphere, mlp, or randmlp)")
