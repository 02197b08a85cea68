"""In-memory stand-ins for the resources scripted agents touch: a virtual
filesystem, a recording network, a shell that interprets a few commands, a
clipboard, an agent memory store, a terminal, and a browser.

Nothing here enforces policy.  The sandbox exists so scenarios can run a
tool call end to end and the harness can observe whether data actually left
(every HTTP request, DNS lookup, and port exposure is recorded).
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field
from typing import Callable, Optional
from urllib.parse import urlsplit

from .model import EMPTY_LABELS, LabelSet, ToolCall
from .ifc import SecretRegistry
from .scanners import FindingKind, strip_ansi


@dataclass(frozen=True)
class ToolResult:
    value: str = ""
    labels: LabelSet = EMPTY_LABELS

    def to_dict(self) -> dict:
        return {"value": self.value, "labels": self.labels.to_list()}


@dataclass
class FileEntry:
    content: str
    labels: LabelSet = EMPTY_LABELS


class VirtualFS:
    def __init__(self) -> None:
        self.files: dict[str, FileEntry] = {}

    def write(self, path: str, content: str, labels: LabelSet = EMPTY_LABELS) -> None:
        self.files[path] = FileEntry(content, labels)

    def read(self, path: str) -> FileEntry:
        if path not in self.files:
            raise FileNotFoundError(path)
        return self.files[path]

    def exists(self, path: str) -> bool:
        return path in self.files


@dataclass(frozen=True)
class NetworkEvent:
    kind: str  # "http" | "dns" | "expose"
    host: str
    url: Optional[str] = None
    body: Optional[str] = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "host": self.host, "url": self.url, "body": self.body}


@dataclass
class Page:
    content: str
    labels: LabelSet = EMPTY_LABELS


class MockNetwork:
    """Records every outbound action; serves seeded pages."""

    def __init__(self) -> None:
        self.events: list[NetworkEvent] = []
        self.pages: dict[str, Page] = {}

    def seed_page(self, url: str, page: Page) -> None:
        self.pages[url] = page

    def record_http(self, url: str, body: Optional[str] = None) -> None:
        try:
            host = (urlsplit(url).hostname or "").lower()
        except ValueError:
            host = ""
        self.events.append(NetworkEvent("http", host, url=url, body=body))

    def record_dns(self, host: str) -> None:
        self.events.append(NetworkEvent("dns", host.lower()))

    def record_expose(self, port: int) -> None:
        self.events.append(NetworkEvent("expose", f"localhost:{port}"))

    def fetch(self, url: str) -> Page:
        self.record_http(url)
        return self.pages.get(url, Page(content=""))

    def observed(self, marker: str) -> bool:
        """True when the marker string appears anywhere in recorded traffic."""
        needle = marker.lower()
        for ev in self.events:
            hay = " ".join(x for x in (ev.host, ev.url, ev.body) if x)
            if needle in hay.lower():
                return True
        return False


@dataclass
class Cell:
    value: str = ""
    labels: LabelSet = EMPTY_LABELS


class MemoryStore:
    def __init__(self) -> None:
        self.entries: dict[str, Cell] = {}

    def store(self, key: str, value: str, labels: LabelSet) -> None:
        self.entries[key] = Cell(value, labels)

    def retrieve(self, key: str) -> Cell:
        return self.entries.get(key, Cell())


class Terminal:
    """Line buffer; applying an OSC 52 write is the terminal's own behavior."""

    def __init__(self, clipboard: Cell) -> None:
        self.lines: list[str] = []
        self.clipboard = clipboard

    def print(self, text: str, labels: LabelSet) -> None:
        self.lines.append(text)
        _, findings = strip_ansi(text)
        for f in findings:
            if f.kind is FindingKind.ANSI_OSC52 and f.payload is not None:
                self.clipboard.value = f.payload
                self.clipboard.labels = labels


_STORAGE_REF_RE = re.compile(r"\$\{storage\.([A-Za-z_][A-Za-z0-9_]*)\}")
_URL_IN_TEXT_RE = re.compile(r"https?://[^\s'\")<>]+")


class Browser:
    """Just enough browser to show where page-controlled requests go."""

    def __init__(self, net: MockNetwork) -> None:
        self.net = net
        self.storage: dict[str, str] = {}
        self.current_url: Optional[str] = None

    def open(self, url: str) -> Page:
        self.current_url = url
        return self.net.fetch(url)

    def fill(self, url: str, fieldname: str, value: str) -> None:
        # Page scripts see field input as it is typed; model it as an
        # immediate request carrying the value.
        self.net.record_http(url, body=f"{fieldname}={value}")

    def exec_script(self, script: str) -> None:
        resolved = _STORAGE_REF_RE.sub(lambda m: self.storage.get(m.group(1), ""), script)
        for url in _URL_IN_TEXT_RE.findall(resolved):
            self.net.record_http(url)


_MD_IMAGE_URL_RE = re.compile(r"!\[[^\]]*\]\(\s*(<[^>]*>|[^)\s]+)[^)]*\)")


class UiSurface:
    """Rendered chat surface; markdown images fetch with zero clicks."""

    def __init__(self, net: MockNetwork) -> None:
        self.net = net
        self.rendered: list[str] = []

    def render(self, markdown: str) -> None:
        self.rendered.append(markdown)
        for m in _MD_IMAGE_URL_RE.finditer(markdown):
            self.net.record_http(m.group(1).strip("<>"))


class MockShell:
    """Interprets a handful of commands, faithfully enough for exfil to show."""

    def __init__(self, net: MockNetwork, fs: VirtualFS) -> None:
        self.net = net
        self.fs = fs

    def exec(self, command: str) -> str:
        try:
            argv = shlex.split(command)
        except ValueError:
            argv = command.split()
        if not argv:
            return ""
        cmd = argv[0].rsplit("/", 1)[-1].lower()
        rest = [a for a in argv[1:] if not a.startswith("-")]
        if cmd in ("ping", "nslookup", "dig", "host"):
            if rest:
                self.net.record_dns(rest[0])
            return f"{cmd}: resolved {rest[0] if rest else '?'}"
        if cmd in ("curl", "wget"):
            body = None
            if "-d" in argv:
                di = argv.index("-d")
                if di + 1 < len(argv):
                    body = argv[di + 1]
            for tok in rest:
                if "://" in tok or ("." in tok and "/" not in tok):
                    url = tok if "://" in tok else f"https://{tok}/"
                    self.net.record_http(url, body=body)
            return "fetched"
        if cmd == "cat" and rest:
            try:
                return self.fs.read(rest[0]).content
            except FileNotFoundError:
                return f"cat: {rest[0]}: no such file"
        if cmd == "echo":
            return " ".join(argv[1:])
        return ""


@dataclass
class World:
    fs: VirtualFS = field(default_factory=VirtualFS)
    net: MockNetwork = field(default_factory=MockNetwork)
    clipboard: Cell = field(default_factory=Cell)
    memory: MemoryStore = field(default_factory=MemoryStore)
    registry: SecretRegistry = field(default_factory=SecretRegistry)

    def __post_init__(self) -> None:
        self.shell = MockShell(self.net, self.fs)
        self.terminal = Terminal(self.clipboard)
        self.browser = Browser(self.net)
        self.ui = UiSurface(self.net)


# ---------------------------------------------------------------------------
# Tool handlers
# ---------------------------------------------------------------------------

Handler = Callable[[World, ToolCall], ToolResult]


def _str_arg(call: ToolCall, name: str, default: str = "") -> str:
    leaf = call.leaf(name)
    if leaf is None:
        return default
    return leaf.value if isinstance(leaf.value, str) else str(leaf.value)


def _labels_of(call: ToolCall, name: str) -> LabelSet:
    leaf = call.leaf(name)
    return leaf.labels if leaf is not None else EMPTY_LABELS


def _all_arg_labels(call: ToolCall) -> LabelSet:
    out = EMPTY_LABELS
    for s in call.arg_label_sets():
        out = out | s
    return out


def h_fs_read(world: World, call: ToolCall) -> ToolResult:
    path = _str_arg(call, "path")
    try:
        entry = world.fs.read(path)
    except FileNotFoundError:
        return ToolResult(value="", labels=EMPTY_LABELS)
    return ToolResult(value=entry.content, labels=entry.labels)


def h_fs_write(world: World, call: ToolCall) -> ToolResult:
    path = _str_arg(call, "path")
    content = _str_arg(call, "content")
    world.fs.write(path, content, _labels_of(call, "content"))
    return ToolResult(value=f"wrote {path}")


def h_http_get(world: World, call: ToolCall) -> ToolResult:
    url = _str_arg(call, "url")
    page = world.net.fetch(url)
    return ToolResult(value=page.content, labels=page.labels)


def h_http_post(world: World, call: ToolCall) -> ToolResult:
    url = _str_arg(call, "url")
    world.net.record_http(url, body=_str_arg(call, "body"))
    return ToolResult(value="posted")


def h_expose_port(world: World, call: ToolCall) -> ToolResult:
    leaf = call.leaf("port")
    port = leaf.value if leaf and isinstance(leaf.value, int) else 0
    world.net.record_expose(port)
    return ToolResult(value=f"exposed localhost:{port}")


def h_shell_exec(world: World, call: ToolCall) -> ToolResult:
    out = world.shell.exec(_str_arg(call, "command"))
    return ToolResult(value=out, labels=_labels_of(call, "command"))


def h_terminal_print(world: World, call: ToolCall) -> ToolResult:
    text = _str_arg(call, "text")
    world.terminal.print(text, _labels_of(call, "text"))
    return ToolResult(value="printed")


def h_clipboard_write(world: World, call: ToolCall) -> ToolResult:
    world.clipboard.value = _str_arg(call, "text")
    world.clipboard.labels = _labels_of(call, "text")
    return ToolResult(value="copied")


def h_clipboard_read(world: World, call: ToolCall) -> ToolResult:
    return ToolResult(value=world.clipboard.value, labels=world.clipboard.labels)


def h_memory_store(world: World, call: ToolCall) -> ToolResult:
    key = _str_arg(call, "key")
    world.memory.store(key, _str_arg(call, "content"), _labels_of(call, "content"))
    return ToolResult(value=f"stored {key}")


def h_memory_retrieve(world: World, call: ToolCall) -> ToolResult:
    cell = world.memory.retrieve(_str_arg(call, "key"))
    return ToolResult(value=cell.value, labels=cell.labels)


def h_browser_open(world: World, call: ToolCall) -> ToolResult:
    page = world.browser.open(_str_arg(call, "url"))
    return ToolResult(value=page.content, labels=page.labels)


def h_browser_fill(world: World, call: ToolCall) -> ToolResult:
    world.browser.fill(_str_arg(call, "url"), _str_arg(call, "field"), _str_arg(call, "value"))
    return ToolResult(value="filled")


def h_browser_exec_script(world: World, call: ToolCall) -> ToolResult:
    world.browser.exec_script(_str_arg(call, "script"))
    return ToolResult(value="executed")


def h_ui_render(world: World, call: ToolCall) -> ToolResult:
    world.ui.render(_str_arg(call, "markdown"))
    return ToolResult(value="rendered")


def h_gitlab_comment(world: World, call: ToolCall) -> ToolResult:
    issue = _str_arg(call, "issue_id", _str_arg(call, "issue"))
    return ToolResult(value=f"commented on issue {issue}")


def h_noop(world: World, call: ToolCall) -> ToolResult:
    return ToolResult(value="ok")
