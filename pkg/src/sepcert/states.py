"""Construction of named quantum states, parametrised families and samplers.

Every family is built exactly (pure families as projectors); randomness is
confined to explicit seeds, so all constructors are deterministic and
thread-safe.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .hermitian import HermitianOp, PartitionedState

__all__ = [
    "StateSpec",
    "parse_state_spec",
    "spec_to_string",
    "make_state",
    "gamma_family",
    "gamma_bloch_vectors",
    "mix_with_white_noise",
    "mix_with_white_noise_mat",
    "random_density",
    "random_pure",
    "ghz_state",
    "w_state",
    "dicke_state",
    "cluster4_state",
    "bell_state",
    "horodecki_3x3",
    "horodecki_2x4",
    "isotropic_state",
    "werner_state",
]

FAMILIES = (
    "ghz", "w", "dicke", "cluster4", "isotropic", "werner",
    "horodecki3x3", "horodecki2x4", "gamma", "maximally_mixed", "file", "bell",
)


def _projector(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# pure multiqubit / qudit families
# ---------------------------------------------------------------------------

def ghz_state(n: int = 3, d: int = 2) -> PartitionedState:
    """(|0...0> + |1...1> + ... + |d-1...d-1>)/sqrt(d) as a projector."""
    if n < 2 or d < 2:
        raise ValueError("ghz needs n >= 2 parties of local dimension >= 2")
    dim = d ** n
    v = np.zeros(dim, dtype=complex)
    step = (dim - 1) // (d - 1)  # index of |i,i,...,i> is i * (d^n-1)/(d-1)
    for i in range(d):
        v[i * step] = 1.0
    return PartitionedState(_projector(v), (d,) * n)


def w_state(n: int = 3, d: int = 2) -> PartitionedState:
    """Uniform single-excitation superposition.

    For qubits this is the standard W state.  For d > 2 every party can be
    excited to any level 1..d-1, giving n(d-1) uniform terms; for n=3, d=3
    this reproduces (|100>+|010>+|001>+|200>+|020>+|002>)/sqrt(6).
    """
    if n < 2 or d < 2:
        raise ValueError("w needs n >= 2 parties of local dimension >= 2")
    dim = d ** n
    v = np.zeros(dim, dtype=complex)
    for party in range(n):
        stride = d ** (n - 1 - party)
        for level in range(1, d):
            v[level * stride] += 1.0
    return PartitionedState(_projector(v), (d,) * n)


def dicke_state(n: int = 4, k: int = 2) -> PartitionedState:
    """Uniform superposition over all weight-k n-qubit basis strings."""
    if not 0 < k < n:
        raise ValueError(f"dicke needs 0 < k < n, got n={n}, k={k}")
    dim = 2 ** n
    v = np.zeros(dim, dtype=complex)
    for idx in range(dim):
        if bin(idx).count("1") == k:
            v[idx] = 1.0
    return PartitionedState(_projector(v), (2,) * n)


def cluster4_state() -> PartitionedState:
    """Four-qubit cluster state (|+0+0>+|+0-1>+|-1-0>+|-1+1>)/2."""
    zero = np.array([1.0, 0.0])
    one = np.array([0.0, 1.0])
    plus = (zero + one) / np.sqrt(2)
    minus = (zero - one) / np.sqrt(2)

    def prod(*factors):
        out = np.ones(1)
        for f in factors:
            out = np.kron(out, f)
        return out

    v = (prod(plus, zero, plus, zero) + prod(plus, zero, minus, one)
         + prod(minus, one, minus, zero) + prod(minus, one, plus, one))
    return PartitionedState(_projector(v), (2, 2, 2, 2))


def bell_state() -> PartitionedState:
    """Two-qubit maximally entangled state (|00>+|11>)/sqrt(2)."""
    return ghz_state(2, 2)


# ---------------------------------------------------------------------------
# bipartite one-parameter families
# ---------------------------------------------------------------------------

def _max_entangled(d: int) -> np.ndarray:
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        v[i * d + i] = 1.0
    return _projector(v)


def isotropic_state(d: int, t: float = 1.0) -> PartitionedState:
    """t |Phi_d><Phi_d| + (1-t) 1/d^2: the threshold in t reads off directly."""
    if d < 2:
        raise ValueError("isotropic needs local dimension >= 2")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"isotropic visibility t must be in [0, 1], got {t}")
    mat = t * _max_entangled(d) + (1 - t) * np.eye(d * d) / (d * d)
    return PartitionedState(mat, (d, d))


def werner_state(d: int, t: float = 1.0) -> PartitionedState:
    """t * (normalised antisymmetric projector) + (1-t) 1/d^2."""
    if d < 2:
        raise ValueError("werner needs local dimension >= 2")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"werner visibility t must be in [0, 1], got {t}")
    swap = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            swap[i * d + j, j * d + i] = 1.0
    p_anti = (np.eye(d * d) - swap) / 2
    seed = p_anti / (d * (d - 1) / 2)
    mat = t * seed + (1 - t) * np.eye(d * d) / (d * d)
    return PartitionedState(mat, (d, d))


def horodecki_3x3(a: float) -> PartitionedState:
    """The 3x3 bound entangled family, normalisation 1/(8a+1)."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"horodecki3x3 parameter a must be in [0, 1], got {a}")
    h = math.sqrt(1.0 - a * a) / 2
    c = (1.0 + a) / 2
    m = np.array([
        [a, 0, 0, 0, a, 0, 0, 0, a],
        [0, a, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, a, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, a, 0, 0, 0, 0, 0],
        [a, 0, 0, 0, a, 0, 0, 0, a],
        [0, 0, 0, 0, 0, a, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, c, 0, h],
        [0, 0, 0, 0, 0, 0, 0, a, 0],
        [a, 0, 0, 0, a, 0, h, 0, c],
    ], dtype=complex)
    return PartitionedState(m / (8 * a + 1), (3, 3))


def horodecki_2x4(b: float) -> PartitionedState:
    """The 2x4 bound entangled family, normalisation 1/(7b+1)."""
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"horodecki2x4 parameter b must be in [0, 1], got {b}")
    h = math.sqrt(1.0 - b * b) / 2
    c = (1.0 + b) / 2
    m = np.array([
        [b, 0, 0, 0, 0, b, 0, 0],
        [0, b, 0, 0, 0, 0, b, 0],
        [0, 0, b, 0, 0, 0, 0, b],
        [0, 0, 0, b, 0, 0, 0, 0],
        [0, 0, 0, 0, c, 0, 0, h],
        [b, 0, 0, 0, 0, b, 0, 0],
        [0, b, 0, 0, 0, 0, b, 0],
        [0, 0, b, 0, h, 0, 0, c],
    ], dtype=complex)
    return PartitionedState(m / (7 * b + 1), (2, 4))


# ---------------------------------------------------------------------------
# the three-qubit gamma(theta) family
# ---------------------------------------------------------------------------

def _gamma_vectors(theta: float) -> list[np.ndarray]:
    c, s = math.cos(theta), math.sin(theta)
    zero = np.array([1.0, 0.0], dtype=complex)
    one = np.array([0.0, 1.0], dtype=complex)

    def bc(i, j, sign):
        out = np.zeros(4, dtype=complex)
        out[2 * i + j] = 1.0
        out[2 * (1 - i) + (1 - j)] = sign
        return out / np.sqrt(2)

    a1 = c * zero + s * one
    a2 = -1j * s * zero + c * one
    a3 = -c * zero + s * one
    a4 = -1j * s * zero - c * one
    return [
        np.kron(a1, bc(0, 0, -1)),
        np.kron(a2, bc(1, 0, -1)),
        np.kron(a3, bc(0, 0, +1)),
        np.kron(a4, bc(1, 0, +1)),
    ]


def gamma_family(theta: float) -> PartitionedState:
    """rho(theta) = (1/4) sum_i |gamma_i(theta)><gamma_i(theta)|.

    The result is X-shaped in the computational basis with diagonal entries
    built from cos^2(theta) and sin^2(theta) and antidiagonal magnitudes
    |sin(theta)cos(theta)|, and is fully biseparable for every theta.
    """
    mats = [_projector(v) for v in _gamma_vectors(theta)]
    return PartitionedState(sum(mats) / 4, (2, 2, 2))


def gamma_bloch_vectors(theta: float) -> np.ndarray:
    """Closed-form Bloch vectors of the four single-qubit reductions.

    Rows are r_1..r_4 with c = cos(theta), s = sin(theta):
    r_1 = (2cs, 0, c^2-s^2), r_2 = (0, 2cs, s^2-c^2), r_3 mirrors r_1 in x,
    r_4 mirrors r_2 in y.  These match Tr_BC of the gamma projectors under
    the standard Pauli convention (sigma_y = [[0,-i],[i,0]]) to 1e-15; all
    six pairwise distances coincide exactly when cos^2 sin^2 = 1/6.
    """
    c, s = math.cos(theta), math.sin(theta)
    cs2 = 2 * c * s
    z = c * c - s * s
    return np.array([
        [cs2, 0.0, z],
        [0.0, cs2, -z],
        [-cs2, 0.0, z],
        [0.0, -cs2, -z],
    ])


# ---------------------------------------------------------------------------
# noise mixing and random sampling
# ---------------------------------------------------------------------------

def mix_with_white_noise_mat(mat: np.ndarray, t: float) -> np.ndarray:
    d = mat.shape[0]
    return t * mat + (1.0 - t) * np.eye(d) / d


def mix_with_white_noise(rho: PartitionedState, t: float) -> HermitianOp:
    """rho_t = t rho + (1-t) 1/d.

    ``t`` may exceed 1 (up to 1.5) to extrapolate along the noise ray; in
    that regime the output can fail positivity, which is flagged by the
    return type: a ``PartitionedState`` when the output is a valid state,
    a plain ``HermitianOp`` otherwise.
    """
    if not 0.0 <= t <= 1.5:
        raise ValueError(f"mixing parameter t must be in [0, 1.5], got {t}")
    mat = mix_with_white_noise_mat(rho.mat, t)
    try:
        return PartitionedState(mat, rho.dims)
    except ValueError:
        return HermitianOp(mat, rho.dims)


def random_density(d: int, seed) -> PartitionedState:
    """Hilbert-Schmidt random state: G G^dag / Tr with G square complex Ginibre."""
    if d < 2:
        raise ValueError("random_density needs d >= 2")
    rng = _rng(seed)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g @ g.conj().T
    return PartitionedState(m / np.trace(m).real, (d,))


def random_pure(d: int, seed) -> PartitionedState:
    """Haar-random pure state projector."""
    if d < 2:
        raise ValueError("random_pure needs d >= 2")
    rng = _rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PartitionedState(_projector(v), (d,))


# ---------------------------------------------------------------------------
# StateSpec and its mini-language
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateSpec:
    """Parsed description of a state family instance.

    ``family`` is one of ``ghz|w|dicke|cluster4|isotropic|werner|
    horodecki3x3|horodecki2x4|gamma|maximally_mixed|file|bell``;
    ``n``/``d`` carry party count and local dimension where applicable,
    ``params`` named real parameters (a, b, theta, t, k) and ``path`` the
    source file for the ``file`` family.
    """

    family: str
    n: int | None = None
    d: int | None = None
    dims: tuple[int, ...] | None = None
    params: dict = field(default_factory=dict)
    path: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown state family {self.family!r}")
        for key in ("a", "b", "t"):
            if key in self.params and not 0.0 <= self.params[key] <= 1.0:
                raise ValueError(f"parameter {key}={self.params[key]} outside [0, 1]")
        if "theta" in self.params and not 0.0 <= self.params["theta"] < 2 * math.pi:
            raise ValueError(f"theta={self.params['theta']} outside [0, 2pi)")


def parse_state_spec(text: str) -> StateSpec:
    """Parse the CLI mini-language, e.g. ``ghz:3x2`` or ``horodecki3x3:a=0.25``.

    Grammar: ``family[:NxD | :D | :path][:key=value ...]``; see README for
    the full list.  Round-trips through :func:`spec_to_string`.
    """
    parts = text.strip().split(":")
    family = parts[0].lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown state family {family!r} in {text!r}")
    if family == "file":
        if len(parts) < 2 or not parts[1]:
            raise ValueError("file spec needs a path, e.g. file:rho.json")
        return StateSpec(family="file", path=":".join(parts[1:]))

    n = d = None
    dims = None
    params = {}
    for tok in parts[1:]:
        if "=" in tok:
            key, val = tok.split("=", 1)
            key = key.strip().lower()
            if key == "k":
                params["k"] = int(val)
            elif key in ("a", "b", "t", "theta"):
                params[key] = float(val)
            else:
                raise ValueError(f"unknown parameter {key!r} in {text!r}")
        elif "x" in tok:
            axes = tuple(int(x) for x in tok.split("x"))
            if family == "maximally_mixed":
                dims = axes
            else:
                if len(axes) != 2:
                    raise ValueError(f"expected NxD in {text!r}")
                n, d = axes
        elif tok:
            d = int(tok)
    return StateSpec(family=family, n=n, d=d, dims=dims, params=params)


def spec_to_string(spec: StateSpec) -> str:
    if spec.family == "file":
        return f"file:{spec.path}"
    parts = [spec.family]
    if spec.dims is not None:
        parts.append("x".join(str(x) for x in spec.dims))
    elif spec.n is not None and spec.d is not None:
        parts.append(f"{spec.n}x{spec.d}")
    elif spec.d is not None:
        parts.append(str(spec.d))
    for key in sorted(spec.params):
        val = spec.params[key]
        parts.append(f"{key}={val:g}" if isinstance(val, float) else f"{key}={val}")
    return ":".join(parts)


def make_state(spec: StateSpec | str) -> PartitionedState:
    """Build the exact density matrix described by ``spec``."""
    if isinstance(spec, str):
        spec = parse_state_spec(spec)
    fam = spec.family
    if fam == "ghz":
        return ghz_state(spec.n or 3, spec.d or 2)
    if fam == "w":
        return w_state(spec.n or 3, spec.d or 2)
    if fam == "dicke":
        if (spec.d or 2) != 2:
            raise ValueError("dicke states are defined here for qubits only")
        return dicke_state(spec.n or 4, spec.params.get("k", 2))
    if fam == "cluster4":
        return cluster4_state()
    if fam == "bell":
        return bell_state()
    if fam == "isotropic":
        return isotropic_state(spec.d or 2, spec.params.get("t", 1.0))
    if fam == "werner":
        return werner_state(spec.d or 2, spec.params.get("t", 1.0))
    if fam == "horodecki3x3":
        if "a" not in spec.params:
            raise ValueError("horodecki3x3 needs parameter a, e.g. horodecki3x3:a=0.25")
        return horodecki_3x3(spec.params["a"])
    if fam == "horodecki2x4":
        if "b" not in spec.params:
            raise ValueError("horodecki2x4 needs parameter b, e.g. horodecki2x4:b=0.25")
        return horodecki_2x4(spec.params["b"])
    if fam == "gamma":
        if "theta" not in spec.params:
            raise ValueError("gamma needs parameter theta, e.g. gamma:theta=0.48")
        return gamma_family(spec.params["theta"])
    if fam == "maximally_mixed":
        dims = spec.dims or ((spec.d,) * (spec.n or 2) if spec.d else None)
        if not dims:
            raise ValueError("maximally_mixed needs dims, e.g. maximally_mixed:2x2")
        dim = math.prod(dims)
        return PartitionedState(np.eye(dim) / dim, dims)
    if fam == "file":
        from .hermitian import load_matrix
        op = load_matrix(spec.path)
        return PartitionedState(op.mat, op.dims)
    raise ValueError(f"unknown state family {fam!r}")
