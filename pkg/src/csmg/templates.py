"""Detection-basis templates and the sliding-window record scanner.

A template is a short pattern of required detection bases.  Wherever the
pattern occurs in a click record, the product of the matched outcomes
estimates a multi-qubit stabilizer correlator of the emitted chain, and
the sign statistics of that product bound the entanglement surviving
between the template's two endpoint photons.

Two families are provided.  Gamma1(l) needs only Z and Y detections and
certifies a (Z, Y) endpoint pair at separation l; Gamma2(l) adds X
detections and certifies an (X, X) pair.  Both exist for l >= 2 with
l = 2 (mod 3), and both are, by construction, products of chain
generators, so on a noiseless record every matched window must come out
+1.  ``verify_template`` checks exactly that, first algebraically and
then on a short simulated stream.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .pauli import PauliString
from .recordio import ClickRecord

SLOT_FREE = 0
SLOT_X = 1
SLOT_Y = 2
SLOT_Z = 3
_SLOT_NAMES = ("_", "X", "Y", "Z")

_DEFAULT_CHUNK = 1 << 22


class TemplateFamily(Enum):
    GAMMA1 = "Gamma1"
    GAMMA2 = "Gamma2"


class TemplateVerificationError(Exception):
    """A template failed its algebraic or simulated self-check."""


def certifiable_lengths(l_max: int) -> List[int]:
    """Separations the template families support: l >= 2, l = 2 (mod 3)."""
    return [l for l in range(2, l_max + 1) if l % 3 == 2]


def _check_length(l: int) -> None:
    if l < 2 or l % 3 != 2:
        raise ValueError("template length must be >= 2 and = 2 (mod 3)")


@dataclass(frozen=True)
class Template:
    """One basis pattern: slot codes over a window of consecutive photons.

    ``slots[p]`` is SLOT_FREE when photon p of the window may carry any
    byte (detected in any basis, or lost) and a basis code otherwise.
    ``pair_positions`` are the two slots whose photons the matched
    correlator certifies; they sit exactly ``l`` emissions apart.
    """

    family: TemplateFamily
    l: int
    slots: Tuple[int, ...]
    pair_positions: Tuple[int, int]
    phase: int = 1

    @property
    def id(self) -> str:
        return f"{self.family.value}(l={self.l})"

    @property
    def span(self) -> int:
        return len(self.slots)

    @property
    def pattern(self) -> str:
        return "".join(_SLOT_NAMES[c] for c in self.slots)

    @property
    def required(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((p, c) for p, c in enumerate(self.slots) if c != SLOT_FREE)

    @property
    def n_measured(self) -> int:
        return sum(1 for c in self.slots if c != SLOT_FREE)

    @property
    def n_preferred(self) -> int:
        return self.slots.count(SLOT_Y)

    def basis_counts(self) -> Tuple[int, int, int]:
        """(#X, #Y, #Z) detections one matched window consumes."""
        return (self.slots.count(SLOT_X),
                self.slots.count(SLOT_Y),
                self.slots.count(SLOT_Z))

    def __str__(self) -> str:
        return f"{self.id} {self.pattern}"


def make_gamma1(l: int) -> Template:
    _check_length(l)
    slots = [SLOT_Z]
    slots += [SLOT_FREE if p % 3 == 0 else SLOT_Y for p in range(1, l + 1)]
    slots.append(SLOT_Z)
    return Template(TemplateFamily.GAMMA1, l, tuple(slots), (0, l))


def make_gamma2(l: int) -> Template:
    _check_length(l)
    slots = [SLOT_Z, SLOT_X]
    slots += [SLOT_FREE if p % 3 == 2 else SLOT_Y for p in range(2, l + 1)]
    slots += [SLOT_X, SLOT_Z]
    return Template(TemplateFamily.GAMMA2, l, tuple(slots), (1, l + 1))


def make_template(family: Union[TemplateFamily, str], l: int) -> Template:
    if not isinstance(family, TemplateFamily):
        family = TemplateFamily(family)
    if family is TemplateFamily.GAMMA1:
        return make_gamma1(l)
    return make_gamma2(l)


def zz_flip_pair_count(template: Template) -> int:
    """Adjacent emission pairs whose Z(i)Z(i+1) error flips the product.

    A pair error flips a matched window's sign exactly when one of the two
    touched slots anticommutes with Z (an X or Y slot) and the other does
    not (a Z slot, a free slot, or a photon outside the window).
    """
    padded = (SLOT_FREE,) + template.slots + (SLOT_FREE,)
    flips = 0
    for a, b in zip(padded, padded[1:]):
        if (a in (SLOT_X, SLOT_Y)) != (b in (SLOT_X, SLOT_Y)):
            flips += 1
    return flips


def _chain_generator(p: int, span: int) -> PauliString:
    if not 1 <= p <= span - 2:
        raise ValueError("generator index outside window interior")
    return PauliString({p - 1: "Z", p: "X", p + 1: "Z"})


def template_k_product(template: Template) -> PauliString:
    """The product of chain generators the template was built from."""
    l = template.l
    if template.family is TemplateFamily.GAMMA1:
        indices: List[int] = []
        for m in range((l - 2) // 3 + 1):
            indices += [3 * m + 1, 3 * m + 2]
    else:
        indices = [1]
        for m in range(1, (l - 2) // 3 + 1):
            indices += [3 * m, 3 * m + 1]
        indices.append(l + 1)
    product = PauliString.identity()
    for p in indices:
        product = product * _chain_generator(p, template.span)
    return product


def verify_template_algebra(template: Template) -> None:
    """Check the template against its own generator product."""
    product = template_k_product(template)
    if product.phase != template.phase:
        raise TemplateVerificationError(
            f"{template.id}: generator product has phase {product.phase}, "
            f"expected {template.phase}")
    expected = {p: _SLOT_NAMES[c] for p, c in template.required}
    actual = {site: letter.value for site, letter in product.letters.items()}
    if actual != expected:
        raise TemplateVerificationError(
            f"{template.id}: generator product letters {actual} do not "
            f"match slots {expected}")


def verify_template_stream(template: Template, *, windows: int = 256,
                           seed: int = 2026) -> None:
    """Check the template on a simulated noiseless forced-basis stream.

    Every aligned window must match and every match must come out +1.
    """
    from .stream import ExperimentConfig, simulate

    schedule = np.array(
        [c - 1 if c != SLOT_FREE else SLOT_Z - 1 for c in template.slots],
        dtype=np.uint8)
    forced = np.tile(schedule, windows)
    cfg = ExperimentConfig(n_photons=template.span * windows, seed=seed,
                           p_d=1.0, burn_in=0)
    record = simulate(cfg, forced_bases=forced)
    est = scan(record, [template], mode="all", stride=template.span,
               burn_in=0)[0]
    if est.match_count != windows:
        raise TemplateVerificationError(
            f"{template.id}: matched {est.match_count} of {windows} "
            f"aligned windows on a forced-basis stream")
    if est.signed_sum != windows:
        raise TemplateVerificationError(
            f"{template.id}: noiseless stream gave signed sum "
            f"{est.signed_sum}, expected +{windows}")


def verify_template(template: Template, *, windows: int = 256,
                    seed: int = 2026) -> None:
    """Self-check a template; raises TemplateVerificationError on failure.

    Algebraic half: the generator product must have phase +1 and exactly
    the template's slot letters.  Simulated half: a noiseless lossless
    stream detected in the template's own basis schedule must match at
    every aligned window, and every match must come out +1.
    """
    verify_template_algebra(template)
    verify_template_stream(template, windows=windows, seed=seed)


# ---------------------------------------------------------------------------
# Scanning.

@dataclass
class CorrelatorEstimate:
    """Match statistics for one template over one record.

    ``signed_sum`` is the exact integer sum of matched window products, so
    estimates merge across chunks and threads without rounding.
    ``overlap_fraction`` is the fraction of matches starting within
    span - 1 photons of the previous match; overlapping windows share
    photons and are therefore correlated samples.
    """

    template_id: str
    family: str
    l: int
    match_count: int
    signed_sum: int
    overlap_fraction: float

    @property
    def mean(self) -> float:
        if self.match_count == 0:
            return math.nan
        return self.signed_sum / self.match_count

    @property
    def stderr(self) -> float:
        if self.match_count == 0:
            return math.inf
        return math.sqrt(max(0.0, 1.0 - self.mean ** 2) / self.match_count)


class _Accumulator:
    __slots__ = ("count", "parity", "overlaps", "first_o", "last_o",
                 "greedy_next")

    def __init__(self, greedy_start: int) -> None:
        self.count = 0
        self.parity = 0
        self.overlaps = 0
        self.first_o: Optional[int] = None
        self.last_o: Optional[int] = None
        self.greedy_next = greedy_start

    def merge(self, other: "_Accumulator", span: int) -> None:
        self.count += other.count
        self.parity += other.parity
        self.overlaps += other.overlaps
        if other.first_o is not None:
            if self.last_o is not None and other.first_o - self.last_o < span:
                self.overlaps += 1
            if self.first_o is None:
                self.first_o = other.first_o
            self.last_o = other.last_o


def _match_arrays(bas: np.ndarray, sig: np.ndarray, required, lo: int,
                  nstarts: int) -> Tuple[np.ndarray, np.ndarray]:
    mask: Optional[np.ndarray] = None
    parity: Optional[np.ndarray] = None
    for p, code in required:
        seg = bas[lo + p:lo + p + nstarts]
        if mask is None:
            mask = seg == code
        else:
            np.logical_and(mask, seg == code, out=mask)
        sg = sig[lo + p:lo + p + nstarts]
        if parity is None:
            parity = sg.copy()
        else:
            np.bitwise_xor(parity, sg, out=parity)
    return mask, parity


def _consume_block(acc: _Accumulator, template: Template, required,
                   bas: np.ndarray, sig: np.ndarray, block_start: int,
                   o_lo: int, o_hi: int, anchor: int, stride: int,
                   mode: str) -> None:
    if o_hi <= o_lo:
        return
    lo = o_lo - block_start
    nstarts = o_hi - o_lo
    mask, parity = _match_arrays(bas, sig, required, lo, nstarts)
    base = o_lo
    if stride > 1:
        t0 = (anchor - o_lo) % stride
        if t0 >= nstarts:
            return
        mask = mask[t0::stride]
        parity = parity[t0::stride]
        base = o_lo + t0
    matched = np.flatnonzero(mask)
    if matched.size == 0:
        return
    offsets = base + matched * stride
    parities = parity[matched]
    span = template.span
    if mode == "greedy":
        i = int(np.searchsorted(offsets, acc.greedy_next, side="left"))
        while i < offsets.shape[0]:
            o = int(offsets[i])
            acc.count += 1
            acc.parity += int(parities[i])
            acc.greedy_next = o + span
            if acc.first_o is None:
                acc.first_o = o
            acc.last_o = o
            i = int(np.searchsorted(offsets, acc.greedy_next, side="left"))
        return
    acc.count += int(offsets.shape[0])
    acc.parity += int(parities.sum(dtype=np.int64))
    if acc.last_o is not None:
        gaps = np.diff(offsets, prepend=acc.last_o)
    else:
        gaps = np.diff(offsets)
        acc.first_o = int(offsets[0])
    acc.overlaps += int(np.count_nonzero(gaps < span))
    acc.last_o = int(offsets[-1])


def _scan_range(events: np.ndarray, template: Template, o_lo: int, o_hi: int,
                anchor: int, stride: int, mode: str,
                chunk_size: int) -> _Accumulator:
    acc = _Accumulator(greedy_start=o_lo)
    required = template.required
    span = template.span
    for s0 in range(o_lo, o_hi, chunk_size):
        s1 = min(s0 + chunk_size, o_hi)
        block = np.asarray(events[s0:s1 - 1 + span])
        bas = block >> 1
        sig = block & 1
        _consume_block(acc, template, required, bas, sig, s0, s0, s1,
                       anchor, stride, mode)
    return acc


def _coerce_record(record, burn_in: Optional[int]) -> Tuple[np.ndarray, int]:
    if isinstance(record, ClickRecord):
        events = record.events
        if burn_in is None:
            burn_in = record.burn_in
    else:
        events = np.asarray(record, dtype=np.uint8)
        if burn_in is None:
            burn_in = 0
    return events, burn_in


def scan(record, templates: Sequence[Template], *, mode: str = "all",
         stride: int = 1, burn_in: Optional[int] = None,
         chunk_size: int = _DEFAULT_CHUNK,
         threads: int = 1) -> List[CorrelatorEstimate]:
    """Slide every template over the record and tally matched windows.

    ``mode="all"`` counts every match (default); ``mode="greedy"`` keeps
    only matches that do not overlap a previously kept one, giving
    independent samples at the cost of statistics.  ``stride`` restricts
    window starts to burn_in, burn_in + stride, ...  Results are
    bit-identical for any ``chunk_size`` and ``threads``; threading only
    applies to mode="all" (greedy is inherently sequential).
    """
    if mode not in ("all", "greedy"):
        raise ValueError(f"unknown scan mode {mode!r}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    events, anchor = _coerce_record(record, burn_in)
    n = events.shape[0]
    templates = list(templates)
    estimates: List[CorrelatorEstimate] = []
    if threads > 1 and mode == "all":
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for template in templates:
                o_lo = anchor
                o_hi = n - template.span + 1
                if o_hi <= o_lo:
                    estimates.append(_estimate_from(template, _Accumulator(o_lo)))
                    continue
                bounds = np.linspace(o_lo, o_hi, threads + 1).astype(np.int64)
                futures = [
                    pool.submit(_scan_range, events, template, int(a), int(b),
                                anchor, stride, mode, chunk_size)
                    for a, b in zip(bounds, bounds[1:]) if b > a
                ]
                total = _Accumulator(o_lo)
                for fut in futures:
                    total.merge(fut.result(), template.span)
                estimates.append(_estimate_from(template, total))
        return estimates

    # Single pass sharing each block's basis/sign split across templates.
    accs = [_Accumulator(anchor) for _ in templates]
    spans = [t.span for t in templates]
    reqs = [t.required for t in templates]
    w_max = max(spans) if spans else 1
    for s0 in range(anchor, max(anchor, n), chunk_size):
        s1 = min(s0 + chunk_size, n)
        block = np.asarray(events[s0:min(s1 - 1 + w_max, n)])
        bas = block >> 1
        sig = block & 1
        for template, acc, req in zip(templates, accs, reqs):
            o_hi = min(s1, n - template.span + 1)
            _consume_block(acc, template, req, bas, sig, s0, s0, o_hi,
                           anchor, stride, mode)
    estimates.extend(_estimate_from(t, a) for t, a in zip(templates, accs))
    return estimates


def _estimate_from(template: Template, acc: _Accumulator) -> CorrelatorEstimate:
    overlap = acc.overlaps / acc.count if acc.count else 0.0
    return CorrelatorEstimate(
        template_id=template.id,
        family=template.family.value,
        l=template.l,
        match_count=acc.count,
        signed_sum=acc.count - 2 * acc.parity,
        overlap_fraction=overlap,
    )
