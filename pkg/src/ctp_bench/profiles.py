"""Coding-tool profiles: ordered option overlays on top of an encoder preset.

A profile is a named list of ``--Key=Value`` assignments plus the profiles it
is composed from. Resolution flattens the composition left to right, so the
last assignment to a key wins while the key keeps the position where it was
first assigned.

Profile definition files use a small line-oriented grammar::

    # comment
    profile fastalf : v5 & v8 { ALF = flag; ALFSpeed = flag }
    myprofile = v58 & { SAO = 1 }

Values are integers, the keyword ``flag`` (a bare ``--Key`` switch) or a
double-quoted string.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .errors import CycleDetected, DuplicateProfile, ParseError, UnknownParent, UnknownProfile

OptionValue = Union[bool, int, str]

PRESETS = ("faster", "fast", "medium", "slow", "slower")

# Table 1 prints both spellings; keys are canonicalised to the registry spelling.
KEY_ALIASES = {
    "MaxMTTDepthISliceC": "MaxMTTDEepthISliceC",
    "CCLAF": "CCALF",
}


def canonical_key(key: str) -> str:
    return KEY_ALIASES.get(key, key)


@dataclass(frozen=True)
class OptionAssignment:
    key: str
    value: OptionValue = True

    def __post_init__(self):
        if not self.key or any(c.isspace() for c in self.key):
            raise ValueError(f"invalid option key {self.key!r}")
        if self.value is False:
            raise ValueError("use 0 rather than False to disable an option")

    def token(self) -> str:
        return format_option(self.key, self.value)


def format_option(key: str, value: OptionValue) -> str:
    if value is True:
        return f"--{key}"
    return f"--{key}={value}"


@dataclass(frozen=True)
class CodingToolProfile:
    name: str
    base: str = "medium"
    overlays: tuple[OptionAssignment, ...] = ()
    parents: tuple[str, ...] = ()
    description: str = ""


def _opts(*items) -> tuple[OptionAssignment, ...]:
    out = []
    for item in items:
        if "=" in item:
            k, v = item.split("=", 1)
            out.append(OptionAssignment(k, int(v)))
        else:
            out.append(OptionAssignment(item, True))
    return tuple(out)


# Evaluated profiles on top of the VVenC medium preset.
BUILTIN_PROFILES: tuple[CodingToolProfile, ...] = (
    CodingToolProfile("medium", description="VVenC medium preset, no overlay"),
    CodingToolProfile(
        "EE",
        overlays=_opts(
            "Affine=0", "MIP=0", "ISP=0", "LMChroma=0", "BDOF=0", "DMVR=0",
            "PROF=0", "SbTMVP=0", "SMVD=0", "LFNST=0", "LoopFilterDisable",
            "EDO=0", "SAO=0", "LMCS=0", "BCW=2", "CCALF=0", "ALF=0",
        ),
        description="reduced energy-efficient tool set (v1)",
    ),
    CodingToolProfile("v2", overlays=_opts("ALF", "CCALF", "ALFSpeed"), parents=("EE",)),
    CodingToolProfile("v3", overlays=_opts("BDOF", "DMVR"), parents=("EE",)),
    CodingToolProfile("v4", overlays=_opts("MMVD=1", "Geo=1", "AMVR=1"), parents=("EE",)),
    CodingToolProfile(
        "v5",
        overlays=_opts("MaxMTTDepthISliceL=3", "MaxMTTDEepthISliceC=3", "MaxMTTDepth=2"),
        parents=("EE",),
    ),
    CodingToolProfile("v6", overlays=_opts("Affine=2", "PROF"), parents=("EE",)),
    CodingToolProfile("v7", overlays=_opts("LoopFilterDisable=0", "EDO=2"), parents=("EE",)),
    CodingToolProfile("v8", overlays=_opts("LMChroma"), parents=("EE",)),
    CodingToolProfile("v58", parents=("v5", "v8")),
    CodingToolProfile("v258", parents=("v2", "v5", "v8")),
    CodingToolProfile("v2568", parents=("v2", "v5", "v6", "v8")),
)


class ProfileRegistry:
    """Immutable-after-load map of profile name to definition."""

    def __init__(self, profiles: Iterable[CodingToolProfile] = ()):
        self._profiles: dict[str, CodingToolProfile] = {}
        self._cache: dict[str, dict[str, OptionValue]] = {}
        for p in profiles:
            self.add(p)

    @classmethod
    def builtin(cls) -> "ProfileRegistry":
        return cls(BUILTIN_PROFILES)

    def add(self, profile: CodingToolProfile) -> None:
        if profile.name in self._profiles:
            raise DuplicateProfile(f"profile {profile.name!r} already defined")
        if profile.base not in PRESETS:
            raise UnknownParent(f"profile {profile.name!r}: unknown base preset {profile.base!r}")
        for parent in profile.parents:
            if parent == profile.name:
                raise CycleDetected([profile.name, profile.name])
            if parent not in self._profiles:
                raise UnknownParent(f"profile {profile.name!r}: unknown parent {parent!r}")
        # parents must already exist, so insertion can never close a cycle
        self._profiles[profile.name] = profile

    def __contains__(self, name) -> bool:
        return name in self._profiles

    def __getitem__(self, name) -> CodingToolProfile:
        try:
            return self._profiles[name]
        except KeyError:
            raise UnknownProfile(f"unknown profile {name!r}") from None

    def __iter__(self):
        return iter(self._profiles.values())

    def __len__(self) -> int:
        return len(self._profiles)

    def names(self) -> list[str]:
        return list(self._profiles)

    def base_of(self, name: str) -> str:
        return self[name].base

    def linearize(self, name: str) -> list[str]:
        """Profiles whose own overlays make up ``name``, in application order.

        Post-order over the composition graph with parents in listed order;
        a shared ancestor (EE under v2 & v5) is applied once, before its
        first descendant, so it cannot revert an earlier sibling's changes.
        """
        order: list[str] = []

        def visit(n, stack):
            if n in stack:
                raise CycleDetected(list(stack[stack.index(n):]))
            if n in order:
                return
            for parent in self[n].parents:
                visit(parent, stack + (n,))
            order.append(n)

        visit(name, ())
        return order

    def resolve(self, name: str) -> dict[str, OptionValue]:
        if name not in self._cache:
            effective: dict[str, OptionValue] = {}
            for step in self.linearize(name):
                for opt in self[step].overlays:
                    _assign(effective, canonical_key(opt.key), opt.value)
            self._cache[name] = effective
        return dict(self._cache[name])


def _assign(effective, key, value):
    # A bare flag re-enabling a key that an earlier overlay set to a value
    # becomes an explicit 1 so the serialized form still overrides it.
    if value is True and key in effective and effective[key] is not True:
        value = 1
    effective[key] = value


def resolve_profile(registry: ProfileRegistry, name: str) -> dict[str, OptionValue]:
    return registry.resolve(name)


def serialize_args(options, preset: str = "medium", extra: Iterable[OptionAssignment] = ()) -> list[str]:
    """``--preset <name>`` followed by one token per option, then the extras."""
    args = ["--preset", preset]
    args += [format_option(k, v) for k, v in dict(options).items()]
    args += [opt.token() for opt in extra]
    return args


# --- definition files -------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<int>[+-]?\d+(?![A-Za-z_]))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.\-]*)
  | (?P<punct>[:=&{};,])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, source: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, source)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


@dataclass
class _Definition:
    name: str
    refs: list[str] = field(default_factory=list)
    overlays: list[OptionAssignment] = field(default_factory=list)
    line: int = 0
    col: int = 0


class _Parser:
    def __init__(self, text, source):
        self.source = source
        self.toks = _tokenize(text, source)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, tok, message):
        raise ParseError(message, tok.line, tok.col, self.source)

    def expect(self, kind, text=None):
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or "end of input"
            self.fail(tok, f"expected {want!r}, got {got!r}")
        return tok

    def at(self, text):
        tok = self.peek()
        return tok.kind == "punct" and tok.text == text

    def parse(self) -> list[_Definition]:
        defs = []
        while self.peek().kind != "eof":
            defs.append(self.statement())
        return defs

    def statement(self) -> _Definition:
        tok = self.expect("ident")
        if tok.text == "profile" and self.peek().kind == "ident":
            name = self.next()
            self.expect("punct", ":")
        else:
            name = tok
            self.expect("punct", "=")
        d = _Definition(name.text, line=name.line, col=name.col)
        self.refs(d)
        if self.at("{"):
            self.block(d)
        if self.at(";"):
            self.next()
        return d

    def refs(self, d):
        while True:
            if self.at("{"):
                self.block(d)
            else:
                d.refs.append(self.expect("ident").text)
            if not self.at("&"):
                return
            self.next()

    def block(self, d):
        self.expect("punct", "{")
        while not self.at("}"):
            key = self.expect("ident")
            self.expect("punct", "=")
            d.overlays.append(OptionAssignment(canonical_key(key.text), self.value()))
            if self.at(";") or self.at(","):
                self.next()
            elif not self.at("}"):
                self.fail(self.peek(), "expected ';' or '}' after option value")
        self.next()

    def value(self):
        tok = self.next()
        if tok.kind == "int":
            return int(tok.text)
        if tok.kind == "ident" and tok.text == "flag":
            return True
        if tok.kind == "string":
            return tok.text[1:-1]
        self.fail(tok, f"expected integer, 'flag' or string value, got {tok.text or 'end of input'!r}")


def parse_profiles(text: str, source: str = "<profiles>") -> list[_Definition]:
    return _Parser(text, source).parse()


def load_registry(document: str = "", source: str = "<profiles>", base: ProfileRegistry | None = None) -> ProfileRegistry:
    """Builtin profiles plus the definitions in ``document``.

    Definitions may reference each other in any order; redefining an
    existing profile is an error.
    """
    registry = base if base is not None else ProfileRegistry.builtin()
    defs = parse_profiles(document, source)

    by_name: dict[str, _Definition] = {}
    for d in defs:
        if d.name in by_name or d.name in registry:
            raise DuplicateProfile(f"{source}:{d.line}:{d.col}: profile {d.name!r} already defined")
        by_name[d.name] = d

    profiles: dict[str, CodingToolProfile] = {}
    explicit_base: set[str] = set()
    for d in defs:
        parents, base_preset = [], None
        for ref in d.refs:
            if ref in by_name or ref in registry:
                parents.append(ref)
            elif ref in PRESETS:
                if base_preset is not None or parents:
                    raise ParseError(f"preset {ref!r} must be the first reference", d.line, d.col, source)
                base_preset = ref
                explicit_base.add(d.name)
            else:
                raise UnknownParent(f"{source}:{d.line}:{d.col}: profile {d.name!r}: unknown parent {ref!r}")
        profiles[d.name] = CodingToolProfile(
            d.name, base=base_preset or "medium", overlays=tuple(d.overlays), parents=tuple(parents)
        )

    for name in _topological(profiles):
        p = profiles[name]
        if p.parents and name not in explicit_base:
            first = p.parents[0]
            inherited = profiles[first].base if first in profiles else registry.base_of(first)
            p = CodingToolProfile(p.name, inherited, p.overlays, p.parents)
            profiles[name] = p
        registry.add(p)
    return registry


def _topological(profiles: dict[str, CodingToolProfile]) -> list[str]:
    order: list[str] = []
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    def visit(name, stack):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise CycleDetected(stack[stack.index(name):-1])
        state[name] = 1
        for parent in profiles[name].parents:
            if parent in profiles:
                visit(parent, stack + [parent])
        state[name] = 2
        order.append(name)

    for name in profiles:
        visit(name, [name])
    return order


def load_registry_files(paths: Iterable[str | Path] = ()) -> ProfileRegistry:
    registry = ProfileRegistry.builtin()
    for path in paths:
        path = Path(path)
        registry = load_registry(path.read_text(encoding="utf-8"), str(path), base=registry)
    return registry
