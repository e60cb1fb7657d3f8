"""Tokenizer for `.mini` source."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import MiniSyntaxError

KEYWORDS = {
    "fn", "if", "else", "while", "return", "throw", "try", "catch",
    "lock", "spawn", "new", "true", "false", "null", "this",
}

# longest first so <= wins over <
PUNCT = [
    "==", "!=", "<=", ">=", "&&", "||",
    "(", ")", "{", "}", "[", "]", ";", ",", ".",
    "=", "<", ">", "+", "-", "*", "/", "%", "!",
]


@dataclass
class Token:
    kind: str          # 'ident' | 'keyword' | 'int' | 'string' | punct literal | 'eof'
    value: object
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("int", int(text[i:j]), line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            out = []
            while True:
                if j >= n or text[j] == "\n":
                    raise MiniSyntaxError("unterminated string", line, start_col)
                ch = text[j]
                if ch == '"':
                    j += 1
                    break
                if ch == "\\":
                    if j + 1 >= n:
                        raise MiniSyntaxError("unterminated escape", line, start_col)
                    esc = text[j + 1]
                    table = {"n": "\n", "t": "\t", '"': '"', "\\": "\\", "r": "\r"}
                    if esc not in table:
                        raise MiniSyntaxError(f"bad escape \\{esc}", line, col + (j - i))
                    out.append(table[esc])
                    j += 2
                    continue
                out.append(ch)
                j += 1
            toks.append(Token("string", "".join(out), line, start_col))
            col += j - i
            i = j
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                toks.append(Token(p, p, line, start_col))
                i += len(p)
                col += len(p)
                break
        else:
            raise MiniSyntaxError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", None, line, col))
    return toks
