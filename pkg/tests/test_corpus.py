import pytest
from hypothesis import given, strategies as st

from genma.corpus import (CharVocabulary, ParseError, RawTweet, build_vocab, encode,
                          load_sentimix, normalize, to_examples)


def write(tmp_path, text):
    p = tmp_path / "data.txt"
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadSentimix:
    def test_single_block(self, tmp_path):
        tweets = load_sentimix(write(tmp_path, "meta 1 positive\nnice\ten\nhai\thi\n\n"))
        assert tweets == [RawTweet("1", (("nice", "en"), ("hai", "hi")), "positive")]

    def test_empty_file(self, tmp_path):
        assert load_sentimix(write(tmp_path, "")) == []

    def test_bad_label_names_line(self, tmp_path):
        text = "meta 1 positive\na\ten\n\nmeta 2 bad_label\nb\ten\n"
        with pytest.raises(ParseError, match=":4:"):
            load_sentimix(write(tmp_path, text))

    def test_malformed_meta(self, tmp_path):
        with pytest.raises(ParseError, match=":1:"):
            load_sentimix(write(tmp_path, "nice\ten\n"))

    def test_unlabelled_and_tab_separated(self, tmp_path):
        tweets = load_sentimix(write(tmp_path, "meta\t7\nkya\thi\n\n\nmeta\t8\tneutral\nok\ten"))
        assert [(t.uid, t.label) for t in tweets] == [("7", None), ("8", "neutral")]
        assert tweets[0].text == "kya"

    def test_block_without_tokens(self, tmp_path):
        with pytest.raises(ParseError):
            load_sentimix(write(tmp_path, "meta 1 positive\n\n"))


class TestNormalize:
    def test_example(self):
        assert normalize("Good MORNING!! \U0001F600 http://t.co/x ka vote") == "good morning ka vote"

    @pytest.mark.parametrize("text", ["", "abc"])
    def test_fixed_points(self, text):
        assert normalize(text) == text

    def test_www_and_symbols(self):
        assert normalize("see www.example.com ☀ now…  ok") == "see now ok"

    @given(st.text())
    def test_idempotent(self, s):
        once = normalize(s)
        assert normalize(once) == once


class TestVocab:
    def test_first_occurrence(self):
        v = build_vocab(["ab", "ba"])
        assert v.size == 4
        assert v.char_to_id == {"a": 2, "b": 3}
        assert v.id_to_char[:2] == ["<pad>", "<unk>"]

    def test_single_char(self):
        assert build_vocab(["a"]).size == 3

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            build_vocab([])

    @given(st.lists(st.text(min_size=1), min_size=1))
    def test_deterministic(self, texts):
        assert build_vocab(texts) == build_vocab(texts)

    def test_serialization(self):
        v = build_vocab(["hello world"])
        assert CharVocabulary.from_dict(v.to_dict()) == v


class TestEncode:
    vocab = CharVocabulary.from_dict({"chars": ["a", "b", " "]})

    def test_example(self):
        assert encode("ab a", self.vocab, 6) == [2, 3, 4, 2, 0, 0]

    def test_empty(self):
        assert encode("", self.vocab, 3) == [0, 0, 0]

    def test_unknown(self):
        assert encode("z", self.vocab, 1) == [1]

    def test_zero_max_len(self):
        with pytest.raises(ValueError):
            encode("a", self.vocab, 0)

    def test_truncation(self):
        assert encode("abab", self.vocab, 2) == [2, 3]

    @given(st.text(alphabet="ab ", max_size=30), st.integers(1, 40))
    def test_length_and_round_trip(self, s, max_len):
        ids = encode(s, self.vocab, max_len)
        assert len(ids) == max_len
        if len(s) <= max_len:
            assert self.vocab.decode(ids) == s


def test_to_examples_drops_language_tags():
    tw = RawTweet("1", (("Nice!!", "en"), ("hai", "hi")), "negative")
    vocab = build_vocab(["nice hai"])
    (ex,) = to_examples([tw], vocab, 10)
    assert ex.text == "nice hai" and ex.label_id == 1 and len(ex.char_ids) == 10
