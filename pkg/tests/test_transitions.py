import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simultrans.transitions import (
    DELAY,
    DELAY_TOKEN,
    EMPTY_STATE,
    Action,
    EpisodeFinishedError,
    InvalidPathError,
    PrefixState,
    SourceExhaustedError,
    Vocab,
    actions_to_text,
    applicable_actions,
    apply_action,
    replay,
    replay_states,
    text_to_actions,
)

from helpers import small_vocab


@pytest.fixture
def vocab():
    return small_vocab()


class TestVocab:
    def test_build_places_specials_first(self, vocab):
        assert vocab.tokens[vocab.delay_id] == "<eps>"
        assert vocab.tokens[vocab.eos_id] == "</s>"
        assert vocab.delay_id != vocab.eos_id

    def test_rejects_duplicate_specials(self):
        with pytest.raises(ValueError):
            Vocab(tokens=("<eps>", "</s>", "<eps>"), delay_id=0, eos_id=1)

    def test_rejects_reserved_words(self):
        with pytest.raises(ValueError):
            Vocab.build(["a", "</s>"])

    def test_json_round_trip(self, vocab):
        assert Vocab.from_json(vocab.to_json()) == vocab

    def test_word_ids_exclude_delay(self, vocab):
        assert vocab.delay_id not in vocab.word_ids()
        assert vocab.eos_id in vocab.word_ids()


class TestApplyAction:
    def test_delay_consumes_source_word(self, vocab):
        x = [2, 3, 4]
        state = PrefixState(src_len=1, tgt=(5,), delay_count=1)
        new = apply_action(state, DELAY, x, vocab)
        assert new.src_len == 2
        assert new.tgt == (5,)
        assert new.delay_count == 2
        assert new.last_action == DELAY

    def test_word_extends_target(self, vocab):
        x = [2, 3, 4]
        state = PrefixState(src_len=1, tgt=(5,), delay_count=1)
        new = apply_action(state, Action.word(6), x, vocab)
        assert new.src_len == 1
        assert new.tgt == (5, 6)
        assert new.last_action == Action.word(6)

    def test_delay_on_exhausted_source_rejected(self, vocab):
        x = [2]
        state = PrefixState(src_len=1, tgt=(), delay_count=1)
        with pytest.raises(SourceExhaustedError):
            apply_action(state, DELAY, x, vocab)

    def test_any_action_after_eos_rejected(self, vocab):
        x = [2, 3]
        state = PrefixState(src_len=1, tgt=(vocab.eos_id,), delay_count=1)
        with pytest.raises(EpisodeFinishedError):
            apply_action(state, Action.word(2), x, vocab)
        with pytest.raises(EpisodeFinishedError):
            apply_action(state, DELAY, x, vocab)

    def test_delay_id_is_not_a_word(self, vocab):
        with pytest.raises(ValueError):
            apply_action(EMPTY_STATE, Action.word(vocab.delay_id), [2], vocab)


class TestApplicableActions:
    def test_exhausted_source_excludes_delay(self, vocab):
        state = PrefixState(src_len=2, tgt=(), delay_count=2)
        acts = applicable_actions(state, [2, 3], vocab)
        assert DELAY not in acts
        assert Action.word(2) in acts

    def test_after_eos_empty(self, vocab):
        state = PrefixState(src_len=1, tgt=(vocab.eos_id,), delay_count=1)
        assert applicable_actions(state, [2, 3], vocab) == set()

    def test_fresh_state_allows_everything(self, vocab):
        acts = applicable_actions(EMPTY_STATE, [2, 3, 4], vocab)
        assert DELAY in acts
        assert len(acts) == len(vocab.word_ids()) + 1


class TestReplay:
    def test_empty_is_identity(self, vocab):
        assert replay((), [2, 3], vocab) == EMPTY_STATE

    def test_two_delays_one_word(self, vocab):
        path = (DELAY, DELAY, Action.word(5))
        state = replay(path, [2, 3], vocab)
        assert state.src_len == 2
        assert state.tgt == (5,)

    def test_error_reports_index(self, vocab):
        path = (DELAY, Action.word(5), DELAY)
        with pytest.raises(InvalidPathError) as exc:
            replay(path, [2], vocab)
        assert exc.value.index == 2
        assert isinstance(exc.value.cause, SourceExhaustedError)

    def test_replay_states_prefix_consistency(self, vocab):
        path = (DELAY, Action.word(5), DELAY, Action.word(vocab.eos_id))
        states = replay_states(path, [2, 3], vocab)
        assert len(states) == len(path) + 1
        for i in range(len(path) + 1):
            assert states[i] == replay(path[:i], [2, 3], vocab)


# Random valid action sequences built by always drawing applicable actions.
@st.composite
def valid_paths(draw):
    n_words = draw(st.integers(3, 6))
    vocab = small_vocab(n_words)
    x = draw(st.lists(st.sampled_from(vocab.word_ids()), min_size=1, max_size=6))
    length = draw(st.integers(0, 12))
    state = EMPTY_STATE
    path = []
    for _ in range(length):
        acts = sorted(
            applicable_actions(state, x, vocab),
            key=lambda a: (-1 if a.is_delay else a.word_id),
        )
        if not acts:
            break
        a = draw(st.sampled_from(acts))
        path.append(a)
        state = apply_action(state, a, x, vocab)
    return vocab, x, tuple(path)


@given(valid_paths())
@settings(max_examples=150, deadline=None)
def test_counting_invariants(case):
    vocab, x, path = case
    state = replay(path, x, vocab)
    assert state.src_len == sum(1 for a in path if a.is_delay)
    assert state.tgt_len == sum(1 for a in path if not a.is_delay)
    assert state.delay_count == state.src_len


@given(valid_paths())
@settings(max_examples=150, deadline=None)
def test_delay_never_applicable_when_source_exhausted(case):
    vocab, x, path = case
    for state in replay_states(path, x, vocab):
        acts = applicable_actions(state, x, vocab)
        if state.src_len == len(x):
            assert DELAY not in acts


@given(valid_paths())
@settings(max_examples=100, deadline=None)
def test_serialization_round_trip(case):
    vocab, x, path = case
    line = actions_to_text(path, vocab)
    assert text_to_actions(line, vocab) == path
    if path and path[0].is_delay:
        assert line.startswith(DELAY_TOKEN)


def test_text_rendering(vocab):
    path = (DELAY, Action.word(2), Action.word(vocab.eos_id))
    assert actions_to_text(path, vocab) == "<eps> w0 </s>"


def test_unknown_token_rejected(vocab):
    with pytest.raises(KeyError):
        text_to_actions("nope", vocab)
