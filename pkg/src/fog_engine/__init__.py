"""Fog of War chess engine: rules, belief tracking, and imperfect-information search."""

from .board import (
    BLACK, BLACK_WIN, DRAW, WHITE, WHITE_WIN,
    IllegalMoveError, Move, Position, apply_move, from_fen, is_terminal,
    legal_moves, move_san, move_uci, parse_san, parse_uci, replay, startpos, to_fen,
)
from .observe import ObservationRecord, observe

__all__ = [
    "BLACK", "BLACK_WIN", "DRAW", "WHITE", "WHITE_WIN",
    "IllegalMoveError", "Move", "ObservationRecord", "Position",
    "apply_move", "from_fen", "is_terminal", "legal_moves", "move_san",
    "move_uci", "observe", "parse_san", "parse_uci", "replay", "startpos", "to_fen",
]
