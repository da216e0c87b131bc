"""Photon-stream simulator for a linear cluster source with noise and loss.

Per emitted photon i the pipeline is: (1) emit qubit i entangled to its
predecessor, (2) with probability p_sigma draw a uniformly random Pauli
for photon i, (3) with probability p_zz apply Z(i-1)Z(i) (skipped for
the first photon), (4) finalize photon i-1: detect it with probability
p_d in a basis drawn from (q_x, q_y, q_z), otherwise trace it out as
lost.  The one-photon latency guarantees pair noise lands before either
partner is finalized.  The last photon is finalized after the loop.

A photon in flight receives no further source operations, so the Pauli
drawn for photon i commutes past everything up to photon i's own
finalization and is applied there, right after emission has entangled
i with its successor.  Applying it at the draw point instead would let
the next emission conjugate an X or Y error into a propagated Z on
photon i+1, which is an artifact of growing the chain qubit by qubit,
not a behaviour of the source.

Randomness protocol: photon i consumes exactly four uniforms
(u_sigma, u_zz, u_detbasis, u_outcome) drawn in photon order from a
PCG64 generator seeded by ``seed``.  Both simulation paths read the same
quadruples, so a (config, seed) pair yields a bit-identical record
whether it runs through the compiled transition tables or the reference
stabilizer frame, on any host, with any chunk size.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .pauli import PauliString, StabilizerFrame
from .recordio import EVENT_LOST, ClickRecord, encode_event

try:  # pragma: no cover - exercised implicitly by the fast path
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

_CHUNK = 1 << 20
_AXES = "XYZ"
# fin codes: 0 = detect X, 1 = detect Y, 2 = detect Z, 3 = lost
FIN_LOST = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """Source, noise and detection parameters for one simulated run."""

    n_photons: int
    seed: int = 0
    p_d: float = 1.0
    q_x: float = 1.0 / 3.0
    q_y: float = 1.0 / 3.0
    q_z: float = 1.0 / 3.0
    p_sigma: float = 0.0
    p_zz: float = 0.0
    burn_in: int = 100
    tau_em: float = 1e-9

    def __post_init__(self) -> None:
        if self.n_photons < 1:
            raise ValueError("n_photons must be >= 1")
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError("p_d must lie in [0, 1]")
        for name in ("q_x", "q_y", "q_z"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if abs(self.q_x + self.q_y + self.q_z - 1.0) > 1e-9:
            raise ValueError("q_x + q_y + q_z must equal 1")
        for name in ("p_sigma", "p_zz"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.tau_em <= 0.0:
            raise ValueError("tau_em must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    @property
    def photon_budget_per_second(self) -> float:
        return 1.0 / self.tau_em


# ---------------------------------------------------------------------------
# Shared uniform -> decision helpers.  The scalar and vector versions must
# apply identical floating-point expressions; the reference and table paths
# both rely on that for bit-identical records.

def _sigma_choice(u: float, p_sigma: float) -> int:
    """0 = no error, 1/2/3 = X/Y/Z, reusing the firing uniform for the pick."""
    if p_sigma <= 0.0 or u >= p_sigma:
        return 0
    return 1 + min(int(u * (3.0 / p_sigma)), 2)


def _fin_choice(u: float, p_d: float, q_x: float, q_xy: float) -> int:
    if p_d <= 0.0 or u >= p_d:
        return FIN_LOST
    v = u / p_d
    return int(v >= q_x) + int(v >= q_xy)


def _draw_chunk(cfg: ExperimentConfig, uniforms: np.ndarray,
                forced: Optional[np.ndarray]) -> Tuple[np.ndarray, ...]:
    m = uniforms.shape[0]
    if cfg.p_sigma > 0.0:
        fire = uniforms[:, 0] < cfg.p_sigma
        which = np.minimum(uniforms[:, 0] * (3.0 / cfg.p_sigma), 2.0).astype(np.uint8)
        sp = np.where(fire, which + 1, 0).astype(np.uint8)
    else:
        sp = np.zeros(m, dtype=np.uint8)
    zz = (uniforms[:, 1] < cfg.p_zz).astype(np.uint8)
    if forced is not None:
        fin = forced
    elif cfg.p_d > 0.0:
        v = uniforms[:, 2] / cfg.p_d
        basis = (v >= cfg.q_x).astype(np.uint8) + (v >= cfg.q_x + cfg.q_y).astype(np.uint8)
        fin = np.where(uniforms[:, 2] < cfg.p_d, basis, FIN_LOST).astype(np.uint8)
    else:
        fin = np.full(m, FIN_LOST, dtype=np.uint8)
    coin = (uniforms[:, 3] >= 0.5).astype(np.uint8)
    return sp, zz, fin, coin


# ---------------------------------------------------------------------------
# Transition tables.  The per-photon update is a 6-state Markov chain over
# the frontier qubit's eigenstate (letter in {X, Y, Z}, sign in {+, -});
# the state captures the newest photon before its own deferred Pauli and
# finalization.  Every entry is produced by driving the exact
# StabilizerFrame through one pipeline step, so the fast path is a
# memoization of the engine, not a reimplementation.

_STATE_LETTERS = ("X", "Y", "Z")


def _state_index(letter: str, sign: int) -> int:
    return _STATE_LETTERS.index(letter) * 2 + (0 if sign > 0 else 1)


def _frame_for_state(state: int) -> StabilizerFrame:
    letter = _STATE_LETTERS[state // 2]
    sign = 1 if state % 2 == 0 else -1
    return StabilizerFrame.from_generators(
        [0], [PauliString.single(letter, 0, phase=sign)])


def _apply_step_noise(frame: StabilizerFrame, newest: int, sp: int, zz: int) -> None:
    # sp is the deferred Pauli of the photon leaving the pipeline.
    if sp:
        frame.apply_pauli(PauliString.single(_AXES[sp - 1], newest - 1))
    if zz:
        frame.apply_pauli(PauliString({newest - 1: "Z", newest: "Z"}))


def _finalize_to_byte(frame: StabilizerFrame, qubit: int, fin: int, coin_u: float) -> int:
    if fin == FIN_LOST:
        frame.trace_out(qubit, coin=coin_u)
        return EVENT_LOST
    outcome = frame.finalize(qubit, _AXES[fin], coin=coin_u)
    return encode_event(fin + 1, outcome)


def _build_tables() -> Tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    frame = StabilizerFrame()
    frame.emit_qubit(0)
    letter, sign = frame.single_qubit_state(0)
    init = _state_index(letter.value, sign)

    out = np.zeros((6, 64), dtype=np.uint8)
    nxt = np.zeros((6, 64), dtype=np.uint8)
    for state in range(6):
        for sp in range(4):
            for zz in range(2):
                for fin in range(4):
                    for coin in range(2):
                        frame = _frame_for_state(state)
                        frame.emit_qubit(1)
                        _apply_step_noise(frame, 1, sp, zz)
                        byte = _finalize_to_byte(
                            frame, 0, fin, 0.25 if coin == 0 else 0.75)
                        letter, sign = frame.single_qubit_state(1)
                        code = ((sp * 2 + zz) * 4 + fin) * 2 + coin
                        out[state, code] = byte
                        nxt[state, code] = _state_index(letter.value, sign)

    final = np.zeros((6, 32), dtype=np.uint8)
    for state in range(6):
        for sp in range(4):
            for fin in range(4):
                for coin in range(2):
                    frame = _frame_for_state(state)
                    if sp:
                        frame.apply_pauli(PauliString.single(_AXES[sp - 1], 0))
                    final[state, (sp * 4 + fin) * 2 + coin] = _finalize_to_byte(
                        frame, 0, fin, 0.25 if coin == 0 else 0.75)
    return init, out, nxt, final


_TABLES: Optional[Tuple[int, np.ndarray, np.ndarray, np.ndarray]] = None


def _tables() -> Tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    global _TABLES
    if _TABLES is None:
        _TABLES = _build_tables()
    return _TABLES


# ---------------------------------------------------------------------------
# Chain execution kernels.

def _run_chain_py(codes: np.ndarray, out: np.ndarray, state: int,
                  table_out: np.ndarray, table_next: np.ndarray) -> int:
    out_rows = [row.tobytes() for row in table_out]
    next_rows = [row.tobytes() for row in table_next]
    buf = bytearray(len(codes))
    for t, c in enumerate(codes.tobytes()):
        buf[t] = out_rows[state][c]
        state = next_rows[state][c]
    out[:] = np.frombuffer(buf, dtype=np.uint8)
    return state


if _numba is not None:
    @_numba.njit(cache=True, nogil=True)
    def _run_chain_numba(codes, out, state, table_out, table_next):  # pragma: no cover
        for t in range(codes.shape[0]):
            c = codes[t]
            out[t] = table_out[state, c]
            state = table_next[state, c]
        return state
else:  # pragma: no cover
    _run_chain_numba = None


def _run_chain(codes: np.ndarray, out: np.ndarray, state: int,
               table_out: np.ndarray, table_next: np.ndarray) -> int:
    if _run_chain_numba is not None:
        return int(_run_chain_numba(codes, out, np.int64(state),
                                    table_out, table_next))
    return _run_chain_py(codes, out, state, table_out, table_next)


def _normalize_forced(forced_bases, n: int) -> Optional[np.ndarray]:
    if forced_bases is None:
        return None
    arr = np.asarray(forced_bases)
    if arr.dtype.kind in "US":
        arr = np.array([_AXES.index(str(b).upper()) for b in arr], dtype=np.uint8)
    arr = arr.astype(np.uint8, copy=False)
    if arr.shape[0] != n:
        raise ValueError("forced_bases must give one basis per photon")
    if arr.max(initial=0) > 2:
        raise ValueError("forced basis codes must be 0 (X), 1 (Y) or 2 (Z)")
    return arr


def _simulate_table(cfg: ExperimentConfig, forced: Optional[np.ndarray],
                    chunk: int) -> np.ndarray:
    table_init, table_out, table_next, table_final = _tables()
    n = cfg.n_photons
    rng = np.random.default_rng(cfg.seed)
    events = np.empty(n, dtype=np.uint8)
    state = table_init
    carry_sp = carry_fin = carry_coin = 0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        uniforms = rng.random((m, 4))
        fslice = forced[start:start + m] if forced is not None else None
        sp, zz, fin, coin = _draw_chunk(cfg, uniforms, fslice)
        if start == 0:
            codes = (((sp[:-1] * 2 + zz[1:]) * 4 + fin[:-1]) * 2 + coin[:-1])
            out_slice = events[0:m - 1]
        else:
            sp_prev = np.concatenate(([carry_sp], sp[:-1])).astype(np.uint8)
            fin_prev = np.concatenate(([carry_fin], fin[:-1])).astype(np.uint8)
            coin_prev = np.concatenate(([carry_coin], coin[:-1])).astype(np.uint8)
            codes = (((sp_prev * 2 + zz) * 4 + fin_prev) * 2 + coin_prev)
            out_slice = events[start - 1:start + m - 1]
        if codes.shape[0]:
            state = _run_chain(np.ascontiguousarray(codes, dtype=np.uint8),
                               out_slice, state, table_out, table_next)
        carry_sp, carry_fin, carry_coin = int(sp[-1]), int(fin[-1]), int(coin[-1])
    events[n - 1] = table_final[state, (carry_sp * 4 + carry_fin) * 2 + carry_coin]
    return events


def _simulate_frame(cfg: ExperimentConfig, forced: Optional[np.ndarray],
                    chunk: int) -> np.ndarray:
    n = cfg.n_photons
    rng = np.random.default_rng(cfg.seed)
    events = np.empty(n, dtype=np.uint8)
    frame = StabilizerFrame()
    q_xy = cfg.q_x + cfg.q_y
    prev_sp = 0
    prev_fin = 0
    prev_coin = 0.0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        uniforms = rng.random((m, 4))
        for t in range(m):
            j = start + t
            frame.emit_qubit(j)
            if j > 0:
                zz = uniforms[t, 1] < cfg.p_zz
                _apply_step_noise(frame, j, prev_sp, 1 if zz else 0)
                events[j - 1] = _finalize_to_byte(frame, j - 1, prev_fin, prev_coin)
            if frame.width > 4:
                raise AssertionError("frontier exceeded 4 qubits")
            prev_sp = _sigma_choice(uniforms[t, 0], cfg.p_sigma)
            if forced is not None:
                prev_fin = int(forced[j])
            else:
                prev_fin = _fin_choice(uniforms[t, 2], cfg.p_d, cfg.q_x, q_xy)
            prev_coin = uniforms[t, 3]
    if prev_sp:
        frame.apply_pauli(PauliString.single(_AXES[prev_sp - 1], n - 1))
    events[n - 1] = _finalize_to_byte(frame, n - 1, prev_fin, prev_coin)
    return events


def simulate(cfg: ExperimentConfig, method: str = "auto",
             forced_bases=None, _chunk: int = _CHUNK) -> ClickRecord:
    """Run the source and return its click record.

    ``method`` selects the execution path: "table" is the compiled
    frontier chain, "frame" drives the stabilizer engine photon by photon,
    and "auto" picks "table".  Both produce bit-identical records.
    ``forced_bases`` replaces the random basis splitter with a fixed
    per-photon schedule (every photon is then detected); used by the
    template self-checks.
    """
    forced = _normalize_forced(forced_bases, cfg.n_photons)
    if method == "auto":
        method = "table"
    if method == "table":
        events = _simulate_table(cfg, forced, _chunk)
    elif method == "frame":
        events = _simulate_frame(cfg, forced, _chunk)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ClickRecord(events=events, burn_in=cfg.burn_in)


def apply_noise_step(frame: StabilizerFrame, index: int, p_sigma: float,
                     p_zz: float, rng) -> Tuple[Optional[str], bool]:
    """Apply one pipeline step's emission noise to a live frame.

    Draws the same two uniforms the stream consumes per step: one decides
    (and picks) the single-qubit Pauli, one decides the pair error on
    (index-1, index).  Both target the outgoing side of the step - the
    Pauli lands on ``index-1``, whose entangling operations are complete -
    and both are skipped when the predecessor is not in the frame.
    Returns (pauli letter or None, pair error fired).
    """
    sp = _sigma_choice(rng.random(), p_sigma)
    u_zz = rng.random()
    if (index - 1) not in frame.active:
        return None, False
    fired_zz = u_zz < p_zz
    _apply_step_noise(frame, index, sp, 1 if fired_zz else 0)
    return (None if sp == 0 else _AXES[sp - 1]), bool(fired_zz)
