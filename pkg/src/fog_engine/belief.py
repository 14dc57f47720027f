"""Exact belief tracking: the set P of positions consistent with our observations.

The tracker enumerates, after every half-move, all successor positions whose
observation (from our side) matches what we actually saw.  Candidates are
deduplicated by state digest, not by history; repetition bookkeeping for the
real game lives in the harness, which announces draws publicly.

Filtering is the hot path (|P| can reach 1e5+), so consistency is decided in
three tiers: a per-move O(1) check against precomputed per-parent template
mismatches, then state dedup, then one exact observe() per *footprint group*
(candidates that agree on every square our pieces could ever see necessarily
produce identical observations).
"""

from __future__ import annotations

import random
from operator import itemgetter
from typing import Optional

from .board import (
    BK, BLACK, BP, EMPTY, KING_TARGETS, KNIGHT_TARGETS, RAYS, WHITE, WK, WP,
    Move, Position, apply_unchecked, moves_for, startpos,
)
from .observe import ObservationRecord, observe


class BeliefInconsistencyError(RuntimeError):
    """The observation stream is incompatible with every tracked position."""


class BeliefState:
    """Immutable snapshot of the possible-position set for one player."""

    __slots__ = ("possible", "viewer", "overflowed")

    def __init__(self, possible: dict, viewer: int, overflowed: bool = False):
        self.possible = possible      # state key -> Position
        self.viewer = viewer
        self.overflowed = overflowed  # set once the ceiling forced sampling

    def __len__(self):
        return len(self.possible)

    def positions(self):
        return self.possible.values()

    def contains_state(self, p: Position) -> bool:
        return p.key() in self.possible

    def dump(self) -> str:
        """Sorted FEN list, one per line (bit-exact debug format)."""
        from .board import to_fen
        return "\n".join(sorted(to_fen(p) for p in self.possible.values()))


def init_belief(viewer: int) -> BeliefState:
    p = startpos()
    return BeliefState({p.key(): p}, viewer)


class _ObservationFilter:
    """Consistency test against one observation, amortized over many candidates."""

    def __init__(self, o: ObservationRecord, viewer: int):
        self.o = o
        self.viewer = viewer
        self.vis = o.visible
        self.blocked = o.blocked
        if viewer == WHITE:
            self.our_lo, self.our_hi = WP, WK
            self.enemy_lo, self.enemy_hi = BP, BK
            self.our_castle_bits = 0b0011
        else:
            self.our_lo, self.our_hi = BP, BK
            self.enemy_lo, self.enemy_hi = WP, WK
            self.our_castle_bits = 0b1100
        self.our_squares = {s: c for s, c in o.visible.items()
                            if self.our_lo <= c <= self.our_hi}
        self._footprint = itemgetter(*sorted(self._footprint_squares()))
        self._group_cache: dict = {}

    def _footprint_squares(self):
        """Every square whose contents could influence the viewer's observation."""
        squares = set(self.vis) | set(self.blocked)
        fwd = 8 if self.viewer == WHITE else -8
        for s, c in self.our_squares.items():
            kind = c - self.our_lo + 1
            if kind == 1:
                for t in (s + fwd, s + 2 * fwd):
                    if 0 <= t < 64:
                        squares.add(t)
                for df in (-1, 1):
                    if 0 <= (s & 7) + df < 8 and 0 <= s + fwd + df < 64:
                        squares.add(s + fwd + df)
            elif kind == 2:
                squares.update(KNIGHT_TARGETS[s])
            elif kind == 6:
                squares.update(KING_TARGETS[s])
            else:
                dirs = {3: (4, 5, 6, 7), 4: (0, 1, 2, 3), 5: range(8)}[kind]
                for d in dirs:
                    squares.update(RAYS[s][d])
        # castle paths (emptiness is observable through the legal-move set)
        base = 0 if self.viewer == WHITE else 56
        squares.update((base + 1, base + 2, base + 3, base + 5, base + 6))
        return squares

    def parent_mismatches(self, p: Position):
        """Template cells a successor move must repair, or None if hopeless.

        Returns (wrong_visible, unoccupied_blocked): squares where the parent
        board disagrees with the observation.  A candidate move is consistent
        only if it touches all of them with the right resulting contents.
        """
        board = p.board
        wrong = [s for s, c in self.vis.items() if board[s] != c]
        if len(wrong) > 4:
            return None
        lo, hi = self.enemy_lo, self.enemy_hi
        empty_blocked = [s for s in self.blocked if not lo <= board[s] <= hi]
        if len(empty_blocked) > 2:
            return None
        return wrong, empty_blocked

    def accept_states(self, states: dict) -> dict:
        """Exact observation check, one observe() per footprint group."""
        out = {}
        cache = self._group_cache
        fp = self._footprint
        o = self.o
        for k, q in states.items():
            gk = (fp(q.board), q.ep, q.castling & self.our_castle_bits,
                  q.halfmove >= 100, q.stm, self._mover_trapped_bit(q))
            ok = cache.get(gk)
            if ok is None:
                ok = cache[gk] = observe(q, self.viewer) == o
            if ok:
                out[k] = q
        return out

    def _mover_trapped_bit(self, q: Position) -> bool:
        # stalemate is public, and whether the side to move has any move at all
        # is the one observable fact the footprint does not determine when the
        # opponent is to move; a king with a free neighbour settles it cheaply
        if q.stm == self.viewer:
            return False
        ek = WK if q.stm == WHITE else BK
        ks = q.board.find(ek)
        if ks >= 0:
            board = q.board
            lo, hi = (WP, WK) if q.stm == WHITE else (BP, BK)
            for t in KING_TARGETS[ks]:
                if not lo <= board[t] <= hi:
                    return False
        return not moves_for(q.board, q.stm, q.castling, q.ep)


def _admit(acc: dict, q: Position) -> None:
    # dedup by state digest; keep the lowest halfmove clock so a candidate
    # never hits the 50-move horizon before the history it stands for
    k = q.key()
    old = acc.get(k)
    if old is None or q.halfmove < old.halfmove:
        acc[k] = q


def update_own_move(b: BeliefState, m: Move, o: ObservationRecord) -> BeliefState:
    """Filter after we played `m` and observed `o`."""
    filt = _ObservationFilter(o, b.viewer)
    pending: dict = {}
    for p in b.possible.values():
        if m not in moves_for(p.board, p.stm, p.castling, p.ep):
            continue
        _admit(pending, apply_unchecked(p, m))
    acc = filt.accept_states(pending)
    if not acc:
        raise BeliefInconsistencyError("own move: no consistent position remains")
    return BeliefState(acc, b.viewer, b.overflowed)


def update_opponent_move(b: BeliefState, o: ObservationRecord,
                         ceiling: int = 10_000_000,
                         rng: Optional[random.Random] = None) -> BeliefState:
    """Expand every candidate by every opponent reply consistent with `o`."""
    viewer = b.viewer
    overflowed = b.overflowed
    candidates = b.possible.values()
    if len(b.possible) * 40 > ceiling:
        # graceful degradation: sample the frontier rather than enumerate it
        rng = rng or random.Random(0)
        candidates = rng.sample(sorted(b.possible.values(), key=Position.key),
                                max(1, ceiling // 40))
        overflowed = True

    filt = _ObservationFilter(o, viewer)
    vis = filt.vis
    blocked = filt.blocked
    enemy_lo, enemy_hi = filt.enemy_lo, filt.enemy_hi
    pending: dict = {}
    for p in candidates:
        pm = filt.parent_mismatches(p)
        if pm is None:
            continue
        wrong, empty_blocked = pm
        board = p.board
        for m in moves_for(board, p.stm, p.castling, p.ep):
            frm, to, promo = m
            moved = promo if promo else board[frm]
            if viewer == WHITE and promo:
                moved += 6
            # squares this move rewrites, with their new contents
            if board[frm] in (WP, BP) and to == p.ep:
                cap = to - 8 if p.stm == WHITE else to + 8
                touched = {frm: EMPTY, to: moved, cap: EMPTY}
            elif board[frm] in (WK, BK) and abs(to - frm) == 2:
                if to > frm:
                    touched = {frm: EMPTY, to: moved, to + 1: EMPTY, to - 1: board[to + 1]}
                else:
                    touched = {frm: EMPTY, to: moved, to - 2: EMPTY, to + 1: board[to - 2]}
            else:
                touched = {frm: EMPTY, to: moved}
            ok = True
            for s in wrong:
                if s not in touched:
                    ok = False
                    break
            if not ok:
                continue
            for s, c in touched.items():
                want = vis.get(s, -1)
                if want >= 0 and want != c:
                    ok = False
                    break
                if s in blocked and not enemy_lo <= c <= enemy_hi:
                    ok = False
                    break
            if not ok:
                continue
            if any(s not in touched for s in empty_blocked):
                continue
            _admit(pending, apply_unchecked(p, m))

    acc = filt.accept_states(pending)
    if not acc:
        raise BeliefInconsistencyError("opponent move: no consistent position remains")
    return BeliefState(acc, viewer, overflowed)


def sample_infoset(b: BeliefState, existing: set, target: int,
                   rng: random.Random) -> list[Position]:
    """`existing` plus uniform draws without replacement up to min(|P|, target)."""
    want = min(len(b.possible), target)
    chosen = {p.key(): p for p in existing}
    pool = [p for k, p in sorted(b.possible.items()) if k not in chosen]
    need = want - len(chosen)
    if need > 0 and pool:
        for p in rng.sample(pool, min(need, len(pool))):
            chosen[p.key()] = p
    return list(chosen.values())
