"""Typed tabular data model, schema files and CSV ingestion.

Cells are plain Python values:

* ``integer``     -> ``int``
* ``real``        -> ``float``
* ``categorical`` -> ``str`` (surrounding whitespace stripped on load)
* ``datetime``    -> ``int`` microseconds since 1970-01-01 (naive, no timezone)
* missing         -> ``None``

Tables are column-oriented and never mutated after construction; every
transformation returns a new :class:`Table`.
"""

from __future__ import annotations

import csv
import enum
import functools
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from tabcheck.errors import (
    DuplicateHeaderError,
    HeaderMismatchError,
    ParseError,
    RangeError,
    SchemaError,
)

EPOCH = datetime(1970, 1, 1)
MICROS_PER_SECOND = 1_000_000
MICROS_PER_DAY = 86_400 * MICROS_PER_SECOND


class Kind(str, enum.Enum):
    INTEGER = "integer"
    REAL = "real"
    CATEGORICAL = "categorical"
    DATETIME = "datetime"

    @property
    def is_numeric(self) -> bool:
        return self in (Kind.INTEGER, Kind.REAL)


@dataclass(frozen=True)
class Column:
    name: str
    kind: Kind
    datetime_format: str | None = None

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise SchemaError("column name must be non-empty")
        if (self.kind is Kind.DATETIME) != (self.datetime_format is not None):
            raise SchemaError(
                f"column {self.name!r}: datetime_format is required for datetime "
                "columns and forbidden otherwise"
            )
        if self.datetime_format is not None:
            _compile_format(self.datetime_format)


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        index = {}
        for i, col in enumerate(self.columns):
            if col.name in index:
                raise SchemaError(f"duplicate column name {col.name!r}")
            index[col.name] = i
        object.__setattr__(self, "_index", index)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __len__(self) -> int:
        return len(self.columns)

    def __contains__(self, name) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no column named {name!r}") from None

    def column(self, name: str) -> Column:
        return self.columns[self.index(name)]

    def names_of_kind(self, *kinds: Kind) -> list[str]:
        return [c.name for c in self.columns if c.kind in kinds]

    def to_text(self) -> str:
        lines = []
        for c in self.columns:
            line = f"{c.name}: {c.kind.value}"
            if c.datetime_format is not None:
                line += f' format="{c.datetime_format}"'
            lines.append(line)
        return "\n".join(lines) + "\n"


_SCHEMA_LINE = re.compile(
    r'^(?P<name>[^:]+?)\s*:\s*(?P<kind>[A-Za-z]+)(?:\s+format\s*=\s*"(?P<fmt>[^"]*)")?\s*$'
)


def parse_schema(text: str) -> Schema:
    """Parse the ``<name>: <kind>[ format="<fmt>"]`` schema format.

    Blank lines and lines starting with ``#`` are ignored.
    """
    columns = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SCHEMA_LINE.match(line)
        if m is None:
            raise SchemaError(f"schema line {lineno}: cannot parse {raw!r}")
        try:
            kind = Kind(m["kind"].lower())
        except ValueError:
            raise SchemaError(
                f"schema line {lineno}: unknown kind {m['kind']!r}"
            ) from None
        try:
            columns.append(Column(m["name"].strip(), kind, m["fmt"]))
        except SchemaError as exc:
            raise SchemaError(f"schema line {lineno}: {exc}") from None
    if not columns:
        raise SchemaError("schema defines no columns")
    return Schema(tuple(columns))


def load_schema(path) -> Schema:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


# --- datetimes --------------------------------------------------------------

# Longest tokens first so "YYYY" wins over "YY" and "ffffff" over nothing.
_DT_TOKENS = {
    "YYYY": ("year", r"\d{4}", "%Y"),
    "MM": ("month", r"\d{1,2}", "%m"),
    "DD": ("day", r"\d{1,2}", "%d"),
    "hh": ("hour", r"\d{1,2}", "%H"),
    "mm": ("minute", r"\d{1,2}", "%M"),
    "ss": ("second", r"\d{1,2}", "%S"),
    "ffffff": ("microsecond", r"\d{1,6}", "%f"),
}
_DT_TOKEN_RE = re.compile("|".join(sorted(_DT_TOKENS, key=len, reverse=True)))


@dataclass(frozen=True)
class _DtFormat:
    regex: re.Pattern
    strftime: str
    fields: tuple[str, ...]


@functools.lru_cache(maxsize=64)
def _compile_format(fmt: str) -> _DtFormat:
    pattern = []
    strf = []
    fields = []
    pos = 0
    for m in _DT_TOKEN_RE.finditer(fmt):
        literal = fmt[pos : m.start()]
        pattern.append(_literal_regex(literal))
        strf.append(literal.replace("%", "%%"))
        name, rx, directive = _DT_TOKENS[m.group()]
        if name in fields:
            raise SchemaError(f"datetime format {fmt!r} repeats token {m.group()!r}")
        fields.append(name)
        pattern.append(f"(?P<{name}>{rx})")
        strf.append(directive)
        pos = m.end()
    tail = fmt[pos:]
    pattern.append(_literal_regex(tail))
    strf.append(tail.replace("%", "%%"))
    for required in ("year", "month", "day"):
        if required not in fields:
            raise SchemaError(f"datetime format {fmt!r} lacks a {required} token")
    return _DtFormat(
        re.compile(r"\s*" + "".join(pattern) + r"\s*\Z"), "".join(strf), tuple(fields)
    )


def _literal_regex(literal: str) -> str:
    # Any whitespace run in the format matches one or more whitespace characters;
    # exported data often pads the date/time separator.
    parts = re.split(r"\s+", literal)
    return r"\s+".join(re.escape(p) for p in parts)


def parse_datetime(raw: str, fmt: str) -> int:
    """Parse ``raw`` with a ``DD/MM/YYYY hh:mm:ss``-style format.

    Returns microseconds since 1970-01-01. Raises :class:`ParseError` when
    the text does not fit the format and :class:`RangeError` when it does
    but names an impossible date (``31/02/2015``) or time.
    """
    spec = _compile_format(fmt)
    m = spec.regex.match(raw)
    if m is None:
        raise ParseError(f"{raw!r} does not match datetime format {fmt!r}")
    parts = {k: int(v) for k, v in m.groupdict().items()}
    if "microsecond" in parts:
        parts["microsecond"] = int(m["microsecond"].ljust(6, "0"))
    try:
        dt = datetime(**parts)
    except ValueError as exc:
        raise RangeError(f"{raw!r} is not a valid datetime: {exc}") from None
    return (dt - EPOCH) // timedelta(microseconds=1)


def format_datetime(micros: int, fmt: str) -> str:
    dt = EPOCH + timedelta(microseconds=micros)
    return dt.strftime(_compile_format(fmt).strftime)


# --- table ------------------------------------------------------------------


def _check_cell(value, col: Column):
    if value is None:
        return None
    kind = col.kind
    if kind is Kind.REAL:
        if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
            return float(value)
    elif kind in (Kind.INTEGER, Kind.DATETIME):
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            return int(value)
    elif isinstance(value, str):
        return value
    raise TypeError(
        f"column {col.name!r} ({kind.value}) cannot hold {type(value).__name__} {value!r}"
    )


class Table:
    """Immutable column-oriented table.

    ``columns`` is a sequence of per-column cell sequences in schema order.
    Cells are validated (and reals coerced to ``float``) unless
    ``validate=False`` is passed by trusted internal callers.
    """

    __slots__ = ("schema", "_columns", "_n")

    def __init__(self, schema: Schema, columns: Sequence[Sequence], *, validate: bool = True):
        if len(columns) != len(schema):
            raise ValueError(
                f"expected {len(schema)} columns, got {len(columns)}"
            )
        lengths = {len(c) for c in columns}
        if len(lengths) > 1:
            raise ValueError(f"ragged columns: lengths {sorted(lengths)}")
        if validate:
            cols = tuple(
                tuple(_check_cell(v, spec) for v in values)
                for spec, values in zip(schema.columns, columns)
            )
        else:
            cols = tuple(tuple(c) for c in columns)
        self.schema = schema
        self._columns = cols
        self._n = lengths.pop() if lengths else 0

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Sequence]) -> "Table":
        rows = [tuple(r) for r in rows]
        for j, r in enumerate(rows):
            if len(r) != len(schema):
                raise ValueError(f"row {j} has {len(r)} cells, expected {len(schema)}")
        if rows:
            columns = list(zip(*rows))
        else:
            columns = [()] * len(schema)
        return cls(schema, columns)

    @property
    def n_rows(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Table):
            return NotImplemented
        return self.schema == other.schema and self._columns == other._columns

    def __repr__(self) -> str:
        return f"Table({self._n} rows x {len(self.schema)} columns: {self.schema.names})"

    def column(self, key: str | int) -> tuple:
        if isinstance(key, str):
            key = self.schema.index(key)
        return self._columns[key]

    @property
    def columns(self) -> tuple[tuple, ...]:
        return self._columns

    def row(self, j: int) -> tuple:
        return tuple(c[j] for c in self._columns)

    def rows(self) -> Iterator[tuple]:
        if not self._columns:
            return iter(())
        return zip(*self._columns)

    def take(self, indices: Iterable[int]) -> "Table":
        idx = list(indices)
        return Table(
            self.schema, [[c[j] for j in idx] for c in self._columns], validate=False
        )

    def with_column(self, name: str, values: Sequence) -> "Table":
        i = self.schema.index(name)
        if len(values) != self._n:
            raise ValueError(f"column {name!r}: expected {self._n} values, got {len(values)}")
        spec = self.schema.columns[i]
        cols = list(self._columns)
        cols[i] = tuple(_check_cell(v, spec) for v in values)
        return Table(self.schema, cols, validate=False)

    def numeric(self, name: str) -> np.ndarray:
        """Column as float64, ``NaN`` for nulls. Datetimes become seconds."""
        col = self.schema.column(name)
        if col.kind is Kind.CATEGORICAL:
            raise TypeError(f"column {name!r} is categorical")
        values = self.column(name)
        scale = MICROS_PER_SECOND if col.kind is Kind.DATETIME else 1
        return np.array(
            [np.nan if v is None else v / scale if scale != 1 else v for v in values],
            dtype=np.float64,
        )

    def numeric_matrix(self, names: Sequence[str]) -> np.ndarray:
        if not names:
            return np.empty((self._n, 0))
        return np.column_stack([self.numeric(n) for n in names])


# --- CSV --------------------------------------------------------------------

_INT_RE = re.compile(r"[+-]?\d+\Z")
_REAL_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")


@dataclass(frozen=True)
class CsvOptions:
    delimiter: str = ","
    quotechar: str = '"'
    null_tokens: frozenset = frozenset({"", "NA"})
    lenient: bool = False
    encoding: str = "utf-8"


def parse_cell(raw: str, col: Column, options: CsvOptions = CsvOptions()):
    """Parse one CSV field according to ``col``; raises :class:`ParseError`."""
    text = raw.strip()
    if text in options.null_tokens:
        return None
    kind = col.kind
    if kind is Kind.CATEGORICAL:
        return text
    if kind is Kind.INTEGER:
        if not _INT_RE.match(text):
            raise ParseError(f"not an integer: {raw!r}")
        return int(text)
    if kind is Kind.REAL:
        if not _REAL_RE.match(text):
            raise ParseError(f"not a real number: {raw!r}")
        return float(text)
    return parse_datetime(text, col.datetime_format)


def load_table(path, schema: Schema, options: CsvOptions = CsvOptions()) -> Table:
    """Read a headed CSV file into a :class:`Table` typed by ``schema``.

    Header names must match the schema names as a set; file column order is
    irrelevant and the result is laid out in schema order. Row ``j`` of the
    file (after the header) is row ``j`` of the table.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding=options.encoding) as fh:
        reader = csv.reader(fh, delimiter=options.delimiter, quotechar=options.quotechar)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise HeaderMismatchError(schema.names, []) from None
        seen = set()
        for h in header:
            if h in seen:
                raise DuplicateHeaderError(h)
            seen.add(h)
        if seen != set(schema.names):
            raise HeaderMismatchError(schema.names, header)

        positions = [header.index(name) for name in schema.names]
        specs = schema.columns
        columns = [[] for _ in specs]
        for j, record in enumerate(reader):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(record)}", row=j, column=None, raw=None
                )
            for out, pos, spec in zip(columns, positions, specs):
                raw = record[pos]
                try:
                    out.append(parse_cell(raw, spec, options))
                except ParseError as exc:
                    if not options.lenient:
                        raise ParseError(str(exc), row=j, column=spec.name, raw=raw) from None
                    out.append(None)
    return Table(schema, columns, validate=False)


def format_cell(value, col: Column) -> str:
    if value is None:
        return ""
    if col.kind is Kind.DATETIME:
        return format_datetime(value, col.datetime_format)
    if col.kind is Kind.REAL:
        return repr(float(value))
    return str(value)


def write_table(table: Table, path, options: CsvOptions = CsvOptions()) -> None:
    """Write ``table`` as CSV; nulls become empty fields."""
    specs = table.schema.columns
    with Path(path).open("w", newline="", encoding=options.encoding) as fh:
        writer = csv.writer(
            fh, delimiter=options.delimiter, quotechar=options.quotechar, lineterminator="\n"
        )
        writer.writerow(table.schema.names)
        for row in table.rows():
            writer.writerow([format_cell(v, c) for v, c in zip(row, specs)])
