"""Flat ``key = value`` text files (metadata, configs).

Lines starting with ``#`` or ``;`` are comments. Keys are case-sensitive.
"""

import configparser

_SECTION = "root"


def _parser():
    p = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    p.optionxform = str
    return p


def loads(text):
    p = _parser()
    p.read_string(f"[{_SECTION}]\n" + text)
    return dict(p[_SECTION])


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dumps(mapping, header=None):
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for key, value in mapping.items():
        if "=" in key or "\n" in str(value):
            raise ValueError(f"cannot encode key {key!r}")
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def dump(mapping, path, header=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(mapping, header))


def floats(text):
    text = text.strip()
    return [float(t) for t in text.split(",")] if text else []
