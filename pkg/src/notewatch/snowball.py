"""Snowball stemmer for Dutch (the original Porter-style Snowball algorithm).

Input words are expected to be lowercase; accented vowels are folded as part
of the prelude, so callers may pass either folded or unfolded text.
"""

from functools import lru_cache

_VOWELS = frozenset("aeiouyè")
_ACCENTS = str.maketrans("äáëéïíöóüú", "aaeeiioouu")

_STEP1_SUFFIXES = ("heden", "ene", "en", "se", "s")
_STEP3B_SUFFIXES = ("baar", "lijk", "bar", "end", "ing", "ig")


def _is_vowel(ch):
    return ch in _VOWELS


def _prelude(word):
    word = word.translate(_ACCENTS)
    chars = list(word)
    if chars and chars[0] == "y":
        chars[0] = "Y"
    # single left-to-right pass; marked letters stop being vowels immediately
    for i in range(len(chars) - 1):
        if not _is_vowel(chars[i]):
            continue
        nxt = chars[i + 1]
        if nxt == "i" and i + 2 < len(chars) and _is_vowel(chars[i + 2]):
            chars[i + 1] = "I"
        elif nxt == "y":
            chars[i + 1] = "Y"
    return "".join(chars)


def _mark_regions(word):
    n = len(word)
    p1 = p2 = n
    if n < 3:
        return p1, p2
    i = 0
    while i < n and not _is_vowel(word[i]):
        i += 1
    while i < n and _is_vowel(word[i]):
        i += 1
    if i >= n:
        return p1, p2
    p1 = i + 1
    j = p1
    while j < n and not _is_vowel(word[j]):
        j += 1
    while j < n and _is_vowel(word[j]):
        j += 1
    if j < n:
        p2 = j + 1
    # p2 is located from the unadjusted p1
    p1 = max(p1, 3)
    return p1, p2


def _undouble(word):
    if word.endswith(("kk", "dd", "tt")):
        return word[:-1]
    return word


def _en_ending(word, start, p1):
    """Remove the suffix at ``word[start:]`` under the en-ending conditions."""
    if start < p1 or start == 0:
        return word, False
    if _is_vowel(word[start - 1]) or word[max(0, start - 3):start] == "gem":
        return word, False
    return _undouble(word[:start]), True


def _e_ending(word, p1):
    if not word.endswith("e"):
        return word, False
    start = len(word) - 1
    if start < p1 or start == 0 or _is_vowel(word[start - 1]):
        return word, False
    return _undouble(word[:start]), True


def _longest(word, suffixes):
    best = None
    for suffix in suffixes:
        if word.endswith(suffix) and (best is None or len(suffix) > len(best)):
            best = suffix
    return best


def _standard_suffix(word, p1, p2):
    suffix = _longest(word, _STEP1_SUFFIXES)
    if suffix is not None:
        start = len(word) - len(suffix)
        if suffix == "heden":
            if start >= p1:
                word = word[:start] + "heid"
        elif suffix in ("en", "ene"):
            word, _ = _en_ending(word, start, p1)
        elif start >= p1 and start > 0:
            prev = word[start - 1]
            if not _is_vowel(prev) and prev != "j":
                word = word[:start]

    word, e_found = _e_ending(word, p1)

    if word.endswith("heid"):
        start = len(word) - 4
        if start >= p2 and (start == 0 or word[start - 1] != "c"):
            word = word[:start]
            if word.endswith("en"):
                word, _ = _en_ending(word, len(word) - 2, p1)

    suffix = _longest(word, _STEP3B_SUFFIXES)
    if suffix is not None:
        start = len(word) - len(suffix)
        if start >= p2:
            if suffix in ("end", "ing"):
                word = word[:start]
                ig = len(word) - 2
                if word.endswith("ig") and ig >= p2 and (ig == 0 or word[ig - 1] != "e"):
                    word = word[:ig]
                else:
                    word = _undouble(word)
            elif suffix == "ig":
                if start == 0 or word[start - 1] != "e":
                    word = word[:start]
            elif suffix == "lijk":
                word, _ = _e_ending(word[:start], p1)
            elif suffix == "baar":
                word = word[:start]
            elif suffix == "bar" and e_found:
                word = word[:start]

    # undouble a vowel in a final consonant-vowel-vowel-consonant group
    if len(word) >= 4:
        last = word[-1]
        if not _is_vowel(last) and last != "I":
            if word[-3:-1] in ("aa", "ee", "oo", "uu") and not _is_vowel(word[-4]):
                word = word[:-2] + last
    return word


@lru_cache(maxsize=200_000)
def stem(token):
    """Return the Snowball Dutch stem of a lowercase token.

    >>> stem("patienten")
    'patient'
    >>> stem("maan")
    'man'
    """
    if not token:
        return token
    word = _prelude(token)
    p1, p2 = _mark_regions(word)
    word = _standard_suffix(word, p1, p2)
    return word.replace("I", "i").replace("Y", "y")
