import random

import pytest

from fog_engine.board import (
    BLACK, WHITE, apply_move, is_terminal, legal_moves, parse_san, startpos,
)
from fog_engine.belief import (
    BeliefInconsistencyError, init_belief, sample_infoset,
    update_opponent_move, update_own_move,
)
from fog_engine.observe import observe


def slow_opponent_update(possible, viewer, o):
    """Direct transcription of the filtering definition, used as an oracle."""
    out = {}
    for p in possible:
        for m in legal_moves(p):
            q = apply_move(p, m)
            if observe(q, viewer) == o:
                k = q.key()
                if k not in out or q.halfmove < out[k].halfmove:
                    out[k] = q
    return set(out)


def test_init_contains_only_startpos():
    b = init_belief(WHITE)
    assert len(b) == 1
    assert b.contains_state(startpos())


def test_own_first_move_keeps_single_state():
    b = init_belief(WHITE)
    p = startpos()
    m = parse_san(p, "c4")
    q = apply_move(p, m)
    b2 = update_own_move(b, m, observe(q, WHITE))
    assert len(b2) == 1
    assert b2.contains_state(q)


def test_opponent_reply_count_matches_bruteforce():
    # 1. c4 then an invisible black reply: |P| = replies producing our record.
    # Of black's 20 answers, d5/b5 are seen by the c4 pawn and c5 blocks it,
    # so 17 quiet replies remain mutually indistinguishable.
    b = init_belief(WHITE)
    p = startpos()
    m = parse_san(p, "c4")
    q = apply_move(p, m)
    b = update_own_move(b, m, observe(q, WHITE))
    true_reply = parse_san(q, "e6")
    r = apply_move(q, true_reply)
    o = observe(r, WHITE)
    b2 = update_opponent_move(b, o)
    expected = slow_opponent_update([q], WHITE, o)
    assert set(b2.possible) == expected
    assert b2.contains_state(r)
    assert len(b2) == 17


def test_revealed_piece_filters_hard():
    # black plays 1...d5 straight into the c4 pawn's view: every surviving
    # candidate must show a black pawn on d5
    b = init_belief(WHITE)
    p = startpos()
    m = parse_san(p, "c4")
    q = apply_move(p, m)
    b = update_own_move(b, m, observe(q, WHITE))
    r = apply_move(q, parse_san(q, "d5"))
    b2 = update_opponent_move(b, observe(r, WHITE))
    d5 = 35
    assert all(pos.board[d5] == 7 for pos in b2.positions())


def test_inconsistent_observation_raises():
    b = init_belief(WHITE)
    p = startpos()
    m = parse_san(p, "e4")
    q = apply_move(p, m)
    wrong = observe(apply_move(startpos(), parse_san(startpos(), "d4")), WHITE)
    with pytest.raises(BeliefInconsistencyError):
        update_own_move(b, m, wrong)


def _step(beliefs, p, m):
    mover = p.stm
    p = apply_move(p, m)
    beliefs[mover] = update_own_move(beliefs[mover], m, observe(p, mover))
    other = 1 - mover
    beliefs[other] = update_opponent_move(beliefs[other], observe(p, other))
    return p


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_true_position_never_filtered_in_random_games(seed):
    # blind random-vs-random play is the worst case for |P| growth: keep it short
    rng = random.Random(seed)
    p = startpos()
    beliefs = {WHITE: init_belief(WHITE), BLACK: init_belief(BLACK)}
    for _ply in range(10):
        if is_terminal(p) is not None:
            break
        p = _step(beliefs, p, rng.choice(legal_moves(p)))
        assert beliefs[WHITE].contains_state(p)
        assert beliefs[BLACK].contains_state(p)


def test_true_position_survives_a_sharp_game():
    # capture-biased play keeps |P| realistic while exercising every move kind
    rng = random.Random(9)
    p = startpos()
    beliefs = {WHITE: init_belief(WHITE), BLACK: init_belief(BLACK)}
    for _ply in range(40):
        if is_terminal(p) is not None:
            break
        moves = legal_moves(p)
        caps = [m for m in moves if p.board[m.to] != 0]
        m = rng.choice(caps if caps and rng.random() < 0.7 else moves)
        p = _step(beliefs, p, m)
        assert beliefs[WHITE].contains_state(p)
        assert beliefs[BLACK].contains_state(p)


def test_update_matches_slow_reference_on_random_games():
    rng = random.Random(11)
    checked = 0
    for _game in range(8):
        p = startpos()
        belief = init_belief(BLACK)
        for _ply in range(14):
            if is_terminal(p) is not None or len(belief) > 600:
                break  # the oracle is quadratic; stop before it dominates
            m = rng.choice(legal_moves(p))
            q = apply_move(p, m)
            if p.stm == WHITE:  # opponent moved; check against the oracle
                o = observe(q, BLACK)
                expected = slow_opponent_update(list(belief.positions()), BLACK, o)
                belief = update_opponent_move(belief, o)
                assert set(belief.possible) == expected
                checked += 1
            else:
                belief = update_own_move(belief, m, observe(q, BLACK))
            p = q
    assert checked >= 25


def test_dedup_no_two_states_share_key():
    rng = random.Random(5)
    p = startpos()
    belief = init_belief(WHITE)
    for _ply in range(20):
        if is_terminal(p) is not None:
            break
        m = rng.choice(legal_moves(p))
        p = apply_move(p, m)
        if p.stm == BLACK:  # we just moved
            belief = update_own_move(belief, m, observe(p, WHITE))
        else:
            belief = update_opponent_move(belief, observe(p, WHITE))
    keys = [q.key() for q in belief.positions()]
    assert len(keys) == len(set(keys))


def test_sample_infoset_clamps_and_is_deterministic():
    b = init_belief(WHITE)
    p = startpos()
    m = parse_san(p, "a3")
    q = apply_move(p, m)
    b = update_own_move(b, m, observe(q, WHITE))
    r = apply_move(q, parse_san(q, "e6"))
    b = update_opponent_move(b, observe(r, WHITE))
    n = len(b)
    assert n > 10
    everything = sample_infoset(b, set(), 256, random.Random(0))
    assert len(everything) == n  # fewer positions than the target: all returned

    few_a = sample_infoset(b, set(), 5, random.Random(42))
    few_b = sample_infoset(b, set(), 5, random.Random(42))
    assert [p.key() for p in few_a] == [p.key() for p in few_b]
    assert len(few_a) == 5

    keep = {everything[0], everything[1]}
    sup = sample_infoset(b, keep, 5, random.Random(7))
    assert {p.key() for p in keep} <= {p.key() for p in sup}
    assert len(sup) == 5
