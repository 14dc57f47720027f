"""Leaf evaluation: a material+visibility heuristic and an external-engine adapter.

The built-in evaluator scores a position by material difference plus a small
bonus per square seen, squashed into [-1, +1].  The external adapter speaks
the universal chess-engine text protocol, querying one multi-line depth-1
search per expanded node so every child is scored in a single call; engine
centipawns are squashed by tanh(cp / 600) (the exact curve is configurable).
Any backend failure falls back to the built-in heuristic with a warning.
"""

from __future__ import annotations

import logging
import math
import subprocess
import threading
from typing import Optional

from .board import (
    BK, BLACK, BP, EMPTY, WHITE, WK, WP,
    Move, Position, apply_unchecked, is_terminal, legal_moves, move_uci,
    square_attacked, to_fen,
)
from .observe import observe

log = logging.getLogger(__name__)

PIECE_VALUES = {1: 1.0, 2: 3.0, 3: 3.0, 4: 5.0, 5: 9.0, 6: 0.0}

# a side that can take the opposing king has all but won; keep leaf values
# strictly inside the terminal range so exact wins still dominate
KING_HANG_VALUE = 0.97


class Evaluation:
    """Per-child scores for one expansion, from the mover's perspective."""

    __slots__ = ("values", "best_child")

    def __init__(self, values: dict):
        self.values = values
        self.best_child = max(values, key=lambda m: (values[m], m))

    def __getitem__(self, move: Move) -> float:
        return self.values[move]


def material_score(p: Position, viewer: int) -> float:
    total = 0.0
    for code in p.board:
        if code == EMPTY:
            continue
        v = PIECE_VALUES[code if code <= WK else code - 6]
        if (code <= WK) == (viewer == WHITE):
            total += v
        else:
            total -= v
    return total


def visibility_count(p: Position, viewer: int) -> int:
    return len(observe(p, viewer).visible)


def simple_eval(p: Position, viewer: int, w_material: float = 1.0,
                w_visibility: float = 0.01, scale: float = 6.0) -> float:
    """Material difference plus visible-square difference, squashed to [-1, +1]."""
    mat = material_score(p, viewer)
    vis = visibility_count(p, viewer) - visibility_count(p, 1 - viewer)
    return math.tanh((w_material * mat + w_visibility * vis) / scale)


def squash_centipawns(cp: float, scale: float = 600.0) -> float:
    return max(-1.0, min(1.0, math.tanh(cp / scale)))


class BuiltinEvaluator:
    """Material + visibility leaf evaluation, with terminal-adjacent awareness."""

    def __init__(self, w_material: float = 1.0, w_visibility: float = 0.01,
                 scale: float = 6.0):
        self.w_material = w_material
        self.w_visibility = w_visibility
        self.scale = scale

    def position_value(self, p: Position, viewer: int) -> float:
        """Static value of `p` for `viewer`, in [-1, +1]."""
        result = is_terminal(p)
        if result is not None:
            if result == 0:
                return 0.0
            won = (result == 1) == (viewer == WHITE)
            return 1.0 if won else -1.0
        ek = BK if p.stm == WHITE else WK
        ks = p.board.find(ek)
        if ks >= 0 and square_attacked(p.board, ks, p.stm):
            # the side to move can capture the king: nearly decided
            return KING_HANG_VALUE if (p.stm == viewer) else -KING_HANG_VALUE
        return simple_eval(p, viewer, self.w_material, self.w_visibility, self.scale)

    def evaluate_children(self, p: Position) -> Evaluation:
        mover = p.stm
        values = {}
        for m in legal_moves(p):
            values[m] = self.position_value(apply_unchecked(p, m), mover)
        if not values:
            raise ValueError("no legal moves to evaluate")
        return Evaluation(values)


class ExternalEngineError(RuntimeError):
    pass


class ExternalEvaluator:
    """Adapter to a conventional engine over the universal text protocol.

    Queries run at depth 1 in multi-line mode, one call per expanded node.
    Values are reported from the mover's perspective.  FoW-only children the
    engine refuses to score (and any protocol failure) fall back to the
    built-in heuristic.
    """

    def __init__(self, command, squash_scale: float = 600.0,
                 timeout: float = 5.0, fallback: Optional[BuiltinEvaluator] = None):
        self.command = command if isinstance(command, list) else [command]
        self.squash_scale = squash_scale
        self.timeout = timeout
        self.fallback = fallback or BuiltinEvaluator()
        self._lock = threading.Lock()
        self._proc = None

    # -- process management -------------------------------------------------
    def _ensure_started(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True, bufsize=1)
        self._send("uci")
        self._read_until("uciok")
        self._send("isready")
        self._read_until("readyok")

    def _send(self, line: str):
        self._proc.stdin.write(line + "\n")
        self._proc.stdin.flush()

    def _read_until(self, token: str, collect: Optional[list] = None):
        timer = threading.Timer(self.timeout, self._kill)
        timer.start()
        try:
            while True:
                line = self._proc.stdout.readline()
                if not line:
                    raise ExternalEngineError("engine closed its pipe")
                line = line.strip()
                if collect is not None:
                    collect.append(line)
                if line.startswith(token):
                    return line
        finally:
            timer.cancel()

    def _kill(self):
        try:
            self._proc.kill()
        except Exception:
            pass

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._send("quit")
            except Exception:
                self._kill()

    # -- evaluation ---------------------------------------------------------
    def position_value(self, p: Position, viewer: int) -> float:
        result = is_terminal(p)
        if result is not None:
            return 0.0 if result == 0 else (1.0 if (result == 1) == (viewer == WHITE) else -1.0)
        try:
            scores = self._query(p, multipv=1)
            best = max(scores.values())
            return best if p.stm == viewer else -best
        except Exception as exc:
            log.warning("external engine failed (%s); using builtin eval", exc)
            return self.fallback.position_value(p, viewer)

    def evaluate_children(self, p: Position) -> Evaluation:
        moves = legal_moves(p)
        try:
            scores = self._query(p, multipv=len(moves))
        except Exception as exc:
            log.warning("external engine failed (%s); using builtin eval", exc)
            return self.fallback.evaluate_children(p)
        mover = p.stm
        values = {}
        for m in moves:
            child = apply_unchecked(p, m)
            if is_terminal(child) is not None:
                values[m] = self.fallback.position_value(child, mover)
            elif m in scores:
                values[m] = scores[m]
            else:
                values[m] = self.fallback.position_value(child, mover)
        return Evaluation(values)

    def _query(self, p: Position, multipv: int) -> dict:
        """Depth-1 multi-line search; returns move -> squashed mover score."""
        with self._lock:
            self._ensure_started()
            self._send(f"setoption name MultiPV value {multipv}")
            self._send("position fen " + to_fen(p))
            self._send("go depth 1")
            lines: list = []
            self._read_until("bestmove", collect=lines)
        scores = {}
        from .board import parse_uci
        for line in lines:
            if not line.startswith("info") or " pv " not in line:
                continue
            toks = line.split()
            try:
                pv_move = parse_uci(toks[toks.index("pv") + 1])
                si = toks.index("score")
                kind, raw = toks[si + 1], int(toks[si + 2])
            except (ValueError, IndexError):
                continue
            if kind == "cp":
                scores[pv_move] = squash_centipawns(raw, self.squash_scale)
            elif kind == "mate":
                scores[pv_move] = 1.0 if raw > 0 else -1.0
        if not scores:
            raise ExternalEngineError("no scored lines in engine output")
        return scores


def make_evaluator(spec: Optional[str] = None, **kwargs):
    """Config hook: None/'builtin' for the heuristic, else an engine command."""
    if not spec or spec == "builtin":
        return BuiltinEvaluator(**kwargs)
    return ExternalEvaluator(spec.split(), **kwargs)
