"""Tokenizer and vocabulary for the bag-of-tokens text tower."""
import string

OOV = "<unk>"
OOV_ID = 0
_STRIP = str.maketrans("", "", string.punctuation)


def normalize_text(text: str) -> list[str]:
    return text.lower().translate(_STRIP).split()


def build_vocab(texts) -> dict:
    """Sorted vocabulary over all tokens in ``texts``; id 0 is reserved for OOV."""
    tokens = sorted({tok for t in texts for tok in normalize_text(t)})
    vocab = {OOV: OOV_ID}
    for tok in tokens:
        vocab.setdefault(tok, len(vocab))
    return vocab


def tokenize(text: str, vocab: dict) -> list[int]:
    ids = [vocab.get(tok, OOV_ID) for tok in normalize_text(text)]
    return ids or [OOV_ID]
