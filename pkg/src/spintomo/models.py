"""Spin-network Hamiltonians: generation, evaluation, gates, partitions.

Every Hamiltonian is stored as two real Pauli-coefficient vectors,

    H(t) = H1 + f(t) * H2,    f(t) = sin(omega*t + 2*pi*phi),

which covers random two-body networks, random long-range networks, the
fixed worked examples, and both gate constructions.  Spin indices in all
public interfaces are 1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import pauli
from .errors import ContractError, InputError, SizeError
from .pauli import PauliString, basis_size, check_n

FAMILIES = ("two_body", "long_range", "gate_static", "gate_timedep")
TOPOLOGY_TAGS = ("chain", "cyclic", "tree", "none", "custom")
GATES = ("toffoli", "fredkin")


@dataclass(frozen=True)
class DrivingFunction:
    """f(t) = sin(omega*t + 2*pi*phi)."""

    omega: float
    phi: float

    def __call__(self, t):
        return np.sin(self.omega * np.asarray(t, dtype=float) + 2 * np.pi * self.phi)


@dataclass(frozen=True)
class NetworkTopology:
    """Undirected coupling graph on n spins.

    adjacency is a symmetric binary (n, n) array with zero diagonal;
    entry [i-1, j-1] = 1 means spins i and j are coupled.
    """

    n: int
    adjacency: np.ndarray
    tag: str = "custom"

    def __post_init__(self):
        check_n(self.n)
        adj = np.asarray(self.adjacency, dtype=int)
        if adj.shape != (self.n, self.n):
            raise SizeError(f"adjacency shape {adj.shape} does not match n={self.n}")
        if not np.array_equal(adj, adj.T):
            raise ContractError("adjacency must be symmetric")
        if np.any(np.diag(adj) != 0):
            raise ContractError("adjacency must have zero diagonal")
        if not np.isin(adj, (0, 1)).all():
            raise ContractError("adjacency must be binary")
        if self.tag not in TOPOLOGY_TAGS:
            raise InputError(f"unknown topology tag {self.tag!r}")
        adj.flags.writeable = False
        object.__setattr__(self, "adjacency", adj)

    def edges(self) -> list[tuple[int, int]]:
        """1-based (i, j) pairs with i < j, row-major order."""
        ii, jj = np.nonzero(np.triu(self.adjacency))
        return [(int(i) + 1, int(j) + 1) for i, j in zip(ii, jj)]

    @classmethod
    def chain(cls, n: int) -> "NetworkTopology":
        adj = np.zeros((n, n), dtype=int)
        for i in range(n - 1):
            adj[i, i + 1] = adj[i + 1, i] = 1
        return cls(n, adj, "chain")

    @classmethod
    def cyclic(cls, n: int) -> "NetworkTopology":
        adj = np.zeros((n, n), dtype=int)
        for i in range(n):
            j = (i + 1) % n
            if i != j:
                adj[i, j] = adj[j, i] = 1
        return cls(n, adj, "cyclic")

    @classmethod
    def tree(cls, n: int) -> "NetworkTopology":
        """Star with spin 1 at the center."""
        adj = np.zeros((n, n), dtype=int)
        adj[0, 1:] = adj[1:, 0] = 1
        if n == 1:
            adj = np.zeros((1, 1), dtype=int)
        return cls(n, adj, "tree")

    @classmethod
    def empty(cls, n: int) -> "NetworkTopology":
        return cls(n, np.zeros((n, n), dtype=int), "none")

    @classmethod
    def from_tag(cls, tag: str, n: int) -> "NetworkTopology":
        makers = {"chain": cls.chain, "cyclic": cls.cyclic, "tree": cls.tree, "none": cls.empty}
        if tag not in makers:
            raise InputError(f"unknown topology tag {tag!r}")
        return makers[tag](n)


@dataclass(eq=False)
class HamiltonianSpec:
    """Complete description of one time-dependent network Hamiltonian."""

    n: int
    family: str
    c1: np.ndarray
    c2: np.ndarray
    driving: DrivingFunction
    topology: NetworkTopology | None = None
    seed: int | None = None

    def __post_init__(self):
        check_n(self.n)
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}")
        p = basis_size(self.n)
        self.c1 = np.asarray(self.c1, dtype=float)
        self.c2 = np.asarray(self.c2, dtype=float)
        if self.c1.shape != (p,) or self.c2.shape != (p,):
            raise SizeError(f"coefficient vectors must have length {p}")
        if self.topology is not None and self.topology.n != self.n:
            raise SizeError("topology size does not match n")

    @cached_property
    def h1(self) -> np.ndarray:
        return pauli.reconstruct(self.c1, self.n)

    @cached_property
    def h2(self) -> np.ndarray:
        return pauli.reconstruct(self.c2, self.n)

    def hamiltonian(self, t) -> np.ndarray:
        """Dense H(t); vectorizes over an array of times (leading axis)."""
        f = self.driving(t)
        if np.ndim(f) == 0:
            return self.h1 + float(f) * self.h2
        return self.h1[None] + np.asarray(f)[:, None, None] * self.h2[None]

    def true_links(self) -> frozenset[int]:
        """Basis indices (non-identity) with a nonzero coefficient in either part."""
        nonzero = (self.c1 != 0) | (self.c2 != 0)
        nonzero[0] = False
        return frozenset(int(i) for i in np.flatnonzero(nonzero))

    def as_dict(self) -> dict:
        def sparse(c):
            return {str(i): float(c[i]) for i in np.flatnonzero(c != 0)}

        return {
            "n": self.n,
            "family": self.family,
            "topology": None
            if self.topology is None
            else {"tag": self.topology.tag, "adjacency": self.topology.adjacency.tolist()},
            "omega": self.driving.omega,
            "phi": self.driving.phi,
            "c1": sparse(self.c1),
            "c2": sparse(self.c2),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianSpec":
        n = d["n"]
        p = basis_size(n)

        def dense(sparse):
            c = np.zeros(p)
            for k, v in sparse.items():
                c[int(k)] = v
            return c

        topo = d.get("topology")
        topology = None
        if topo is not None:
            topology = NetworkTopology(n, np.asarray(topo["adjacency"]), topo["tag"])
        return cls(
            n=n,
            family=d["family"],
            c1=dense(d["c1"]),
            c2=dense(d["c2"]),
            driving=DrivingFunction(d["omega"], d["phi"]),
            topology=topology,
            seed=d.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HamiltonianSpec":
        return cls.from_dict(json.loads(text))


def eval_hamiltonian(spec: HamiltonianSpec, t) -> np.ndarray:
    return spec.hamiltonian(t)


def _two_body_part(topology: NetworkTopology, rng: np.random.Generator) -> np.ndarray:
    """One part of a two-body Hamiltonian with U[0,1] coefficients.

    Draw order (fixed for reproducibility): self-couplings by spin
    ascending, axes x,y,z; then edge couplings edge by edge (row-major),
    axes (l on the lower spin, m on the higher spin) row-major.
    """
    n = topology.n
    c = np.zeros(basis_size(n))
    for spin in range(1, n + 1):
        for axis in (1, 2, 3):
            c[PauliString.single(n, spin, axis).index] = rng.random()
    for i, j in topology.edges():
        for l in (1, 2, 3):
            for m in (1, 2, 3):
                axes = [0] * n
                axes[i - 1] = l
                axes[j - 1] = m
                c[PauliString(tuple(axes)).index] = rng.random()
    return c


def gen_two_body(topology: NetworkTopology, rng: np.random.Generator,
                 seed: int | None = None) -> HamiltonianSpec:
    """Random two-body network on a coupling graph.

    Both parts are drawn independently (part 1 then part 2), followed by
    the driving parameters omega, phi ~ U[0,1].
    """
    c1 = _two_body_part(topology, rng)
    c2 = _two_body_part(topology, rng)
    driving = DrivingFunction(float(rng.random()), float(rng.random()))
    return HamiltonianSpec(topology.n, "two_body", c1, c2, driving, topology, seed)


def gen_long_range(n: int, rng: np.random.Generator,
                   seed: int | None = None) -> HamiltonianSpec:
    """Random network over all 4**n - 1 strings, each kept with chance 1/2.

    One keep/drop coin per string decides existence of the link in both
    parts at once.  Basis indices ascending: draw the coin; only if kept,
    draw the two U[0,1] amplitudes (part 1 then part 2).  Then omega, phi.
    """
    check_n(n)
    p = basis_size(n)
    c1, c2 = np.zeros(p), np.zeros(p)
    for i in range(1, p):
        if rng.random() < 0.5:
            c1[i] = rng.random()
            c2[i] = rng.random()
    driving = DrivingFunction(float(rng.random()), float(rng.random()))
    return HamiltonianSpec(n, "long_range", c1, c2, driving, None, seed)


def one_spin_x() -> HamiltonianSpec:
    """The worked single-spin case H(t) = sigma_x * sin t."""
    c2 = np.zeros(4)
    c2[PauliString.from_label("X").index] = 1.0
    return HamiltonianSpec(1, "two_body", np.zeros(4), c2,
                           DrivingFunction(1.0, 0.0), NetworkTopology.empty(1))


def unit_chain(n: int = 3) -> HamiltonianSpec:
    """Driven chain with unit couplings: sin(t) times (x,y self terms on
    every spin plus nearest-neighbour terms with axes {x,y,z} x {x,y})."""
    check_n(n)
    c2 = np.zeros(basis_size(n))
    for spin in range(1, n + 1):
        for axis in (1, 2):
            c2[PauliString.single(n, spin, axis).index] = 1.0
    for i in range(1, n):
        for l in (1, 2, 3):
            for m in (1, 2):
                axes = [0] * n
                axes[i - 1] = l
                axes[i] = m
                c2[PauliString(tuple(axes)).index] = 1.0
    return HamiltonianSpec(n, "two_body", np.zeros_like(c2), c2,
                           DrivingFunction(1.0, 0.0), NetworkTopology.chain(n))


PRESETS = {"one_spin": one_spin_x, "unit_chain": unit_chain}


def _gate_coefficients(gate: str) -> np.ndarray:
    """Pauli coefficients of the three-spin gate Hamiltonians.

    Toffoli: (pi/8) (I - sz^1)(I - sz^2)(I - sx^3); the controlled spins
    must both sit in the sz = -1 state for the flip to act.
    Fredkin: (pi/8) (I - sz^1)(I4 - sum_a s_a^2 s_a^3).
    """
    eye = np.eye(2)
    if gate == "toffoli":
        h = np.kron(np.kron(eye - pauli.PAULI_Z.real, eye - pauli.PAULI_Z.real),
                    eye - pauli.PAULI_X.real)
    elif gate == "fredkin":
        swapper = np.eye(4) - sum(
            np.kron(s, s).real for s in (pauli.PAULI_X, pauli.PAULI_Y, pauli.PAULI_Z)
        )
        h = np.kron(eye - pauli.PAULI_Z.real, swapper)
    else:
        raise InputError(f"unknown gate {gate!r}; expected one of {GATES}")
    return pauli.decompose((np.pi / 8) * h.astype(complex))


def gate_hamiltonian(gate: str, time_dependent: bool = False) -> HamiltonianSpec:
    """Three-spin gate Hamiltonian, constant or sinusoidally gated.

    The time-dependent variant uses H(t) = g(t) * H_gate with
    g(t) = (pi/2) sin(pi t), whose integral over [0, 1] is 1, so the
    t=1 propagator equals the static gate.
    """
    c = _gate_coefficients(gate)
    if time_dependent:
        return HamiltonianSpec(3, "gate_timedep", np.zeros_like(c), (np.pi / 2) * c,
                               DrivingFunction(np.pi, 0.0))
    return HamiltonianSpec(3, "gate_static", c, np.zeros_like(c),
                           DrivingFunction(0.0, 0.0))


def gate_unitary(gate: str, t: float) -> np.ndarray:
    """Closed-form gate propagator family U(t) with U(0) = I, U(1) = gate.

    The active 2x2 block is X0(t) = [[1 + e^{i pi t}, 1 - e^{i pi t}],
    [1 - e^{i pi t}, 1 + e^{i pi t}]] / 2.  With the (|1>, |0>) basis
    ordering, the Toffoli block sits on the last two basis states and the
    Fredkin block on states 5 and 6.
    """
    phase = np.exp(1j * np.pi * t)
    x0 = 0.5 * np.array([[1 + phase, 1 - phase], [1 - phase, 1 + phase]])
    u = np.eye(8, dtype=complex)
    if gate == "toffoli":
        u[6:8, 6:8] = x0
    elif gate == "fredkin":
        u[5:7, 5:7] = x0
    else:
        raise InputError(f"unknown gate {gate!r}; expected one of {GATES}")
    return u


@dataclass(frozen=True)
class SubspacePartition:
    """Split of the Pauli basis by observability of spins.

    Classes: 'o' strings acting only on observed spins, 'h' only on
    hidden spins, 'i' mixed, 'I' the identity string.
    """

    n: int
    observed: frozenset[int]
    classes: np.ndarray = field(compare=False)

    @property
    def hidden(self) -> frozenset[int]:
        return frozenset(range(1, self.n + 1)) - self.observed

    @property
    def n_hidden(self) -> int:
        return self.n - len(self.observed)

    def class_indices(self, code: str) -> np.ndarray:
        if code not in ("o", "i", "h", "I"):
            raise InputError(f"unknown class code {code!r}")
        return np.flatnonzero(self.classes == code)

    def local_indices(self) -> np.ndarray:
        """Indices of classes o and i (strings touching an observed spin)."""
        return np.flatnonzero((self.classes == "o") | (self.classes == "i"))


def partition_subspaces(n: int, observed) -> SubspacePartition:
    """Classify every basis index by which spins its string touches."""
    check_n(n)
    obs = frozenset(int(s) for s in observed)
    if not obs:
        raise InputError("observed spin set must be non-empty")
    if any(not 1 <= s <= n for s in obs):
        raise InputError(f"observed spins must be within 1..{n}, got {sorted(obs)}")
    table = pauli.axes_table(n)
    obs_cols = np.array([s - 1 for s in sorted(obs)])
    hid_cols = np.array([i for i in range(n) if i + 1 not in obs], dtype=int)
    touches_obs = (table[:, obs_cols] != 0).any(axis=1)
    touches_hid = (table[:, hid_cols] != 0).any(axis=1) if len(hid_cols) else np.zeros(4**n, bool)
    classes = np.full(4**n, "i", dtype="<U1")
    classes[touches_obs & ~touches_hid] = "o"
    classes[~touches_obs & touches_hid] = "h"
    classes[0] = "I"
    classes.flags.writeable = False
    return SubspacePartition(n, obs, classes)


def default_observables(n: int, observed) -> list[PauliString]:
    """All weight>=1 strings supported on the observed spins.

    One observed spin gives its three local Pauli operators; two give the
    fifteen non-identity products, and so on.
    """
    idx = pauli.strings_supported_on(n, observed)
    basis = pauli.pauli_basis(n)
    return [basis[i] for i in idx]
