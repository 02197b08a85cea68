"""Content scanners for covert channels: Unicode Tags smuggling, ANSI control
sequences, secret-bearing URLs and hostnames, and markdown image exfil.

Each scanner is pure and returns Finding records; policy about which findings
deny a call lives in the gateway, not here.
"""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional
from urllib.parse import urlsplit

from .model import EMPTY_LABELS, LabelSet
from .ifc import SecretRegistry


class FindingKind(Enum):
    UNICODE_SMUGGLING = "UnicodeSmuggling"
    ANSI_OSC52 = "AnsiOsc52"
    ANSI_OTHER = "AnsiOther"
    TAINTED_URL_PARAM = "TaintedUrlParam"
    ENCODED_SECRET = "EncodedSecret"
    DNS_EXFIL = "DnsExfil"
    UNAPPROVED_DOMAIN = "UnapprovedDomain"
    UNTRUSTED_IMAGE_ORIGIN = "UntrustedImageOrigin"


@dataclass(frozen=True)
class Finding:
    kind: FindingKind
    message: str
    span: Optional[tuple[int, int]] = None
    payload: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "message": self.message,
            "span": list(self.span) if self.span else None,
            "payload": self.payload,
        }


# ---------------------------------------------------------------------------
# Unicode Tags block (U+E0000..U+E007F)
# ---------------------------------------------------------------------------

TAG_BLOCK_START = 0xE0000
TAG_BLOCK_END = 0xE007F


def _is_tag_char(ch: str) -> bool:
    return TAG_BLOCK_START <= ord(ch) <= TAG_BLOCK_END


def scan_unicode_smuggling(text: str) -> list[Finding]:
    """Find runs of Tags-block characters and decode the hidden ASCII.

    Code points U+E0020..U+E007E shadow printable ASCII (cp - 0xE0000); the
    rest of the block decodes to nothing but still counts as smuggling.
    Spans are character offsets into the input.
    """
    findings: list[Finding] = []
    i = 0
    n = len(text)
    while i < n:
        if not _is_tag_char(text[i]):
            i += 1
            continue
        start = i
        decoded: list[str] = []
        while i < n and _is_tag_char(text[i]):
            cp = ord(text[i])
            if 0xE0020 <= cp <= 0xE007E:
                decoded.append(chr(cp - 0xE0000))
            i += 1
        findings.append(
            Finding(
                kind=FindingKind.UNICODE_SMUGGLING,
                message=f"{i - start} Tags-block characters hiding {len(decoded)} ASCII characters",
                span=(start, i),
                payload="".join(decoded),
            )
        )
    return findings


# ---------------------------------------------------------------------------
# ANSI escape sequences
# ---------------------------------------------------------------------------

ESC = "\x1b"
BEL = "\x07"
ST = "\x1b\\"

# CSI final bytes are 0x40..0x7E; parameter/intermediate bytes 0x20..0x3F.
_CSI_RE = re.compile(r"(?:\x1b\[|\x9b)([\x20-\x3f]*)([\x40-\x7e])?")


def strip_ansi(text: str, allow_sgr: bool = False) -> tuple[str, list[Finding]]:
    """Strip every ESC/C1 control sequence; report the dangerous ones.

    With ``allow_sgr`` false (the default) the sanitized text never contains
    ESC (0x1b) or the C1 CSI/OSC/DCS bytes.  SGR color sequences (CSI ... m)
    are stripped silently since they are ubiquitous and harmless once
    removed; with ``allow_sgr`` true they are kept verbatim instead.  OSC 52
    clipboard writes are reported as AnsiOsc52 with the decoded clipboard
    payload; every other sequence is reported as AnsiOther.
    """
    out: list[str] = []
    findings: list[Finding] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch != ESC and ch not in ("\x9b", "\x9d", "\x90"):
            out.append(ch)
            i += 1
            continue
        start = i
        # Identify the introducer.
        if ch == ESC and i + 1 < n:
            kind_ch = text[i + 1]
        elif ch == "\x9b":
            kind_ch = "["
        elif ch == "\x9d":
            kind_ch = "]"
        elif ch == "\x90":
            kind_ch = "P"
        else:
            i = n
            findings.append(Finding(FindingKind.ANSI_OTHER, "truncated escape", (start, n)))
            continue

        if kind_ch == "[":
            m = _CSI_RE.match(text, i)
            end = m.end() if m else n
            final = m.group(2) if m else None
            if final != "m":
                findings.append(
                    Finding(FindingKind.ANSI_OTHER, f"CSI sequence (final {final!r})", (start, end))
                )
            elif allow_sgr and ch == ESC:
                # Only the 7-bit ESC[...m form is allowlisted; the C1 0x9b
                # introducer is always stripped.
                out.append(text[start:end])
            i = end
            continue
        if kind_ch in ("]", "P"):
            body_start = i + (1 if ch in ("\x9d", "\x90") else 2)
            bel = text.find(BEL, body_start)
            st = text.find(ST, body_start)
            ends = [e for e in (bel, st) if e != -1]
            if ends:
                end_marker = min(ends)
                body = text[body_start:end_marker]
                end = end_marker + (1 if end_marker == bel else 2)
            else:
                body = text[body_start:]
                end = n
            if kind_ch == "]" and body.startswith("52;"):
                parts = body.split(";", 2)
                payload = None
                if len(parts) == 3:
                    try:
                        payload = base64.b64decode(parts[2], validate=True).decode("utf-8", "replace")
                    except (binascii.Error, ValueError):
                        payload = None
                findings.append(
                    Finding(
                        FindingKind.ANSI_OSC52,
                        "OSC 52 clipboard write",
                        (start, end),
                        payload=payload,
                    )
                )
            else:
                label = "OSC" if kind_ch == "]" else "DCS"
                findings.append(Finding(FindingKind.ANSI_OTHER, f"{label} sequence", (start, end)))
            i = end
            continue
        # Two-byte escape (ESC X) or bare trailing ESC.
        end = min(i + 2, n)
        findings.append(Finding(FindingKind.ANSI_OTHER, f"escape sequence ESC {kind_ch!r}", (start, end)))
        i = end
    return "".join(out), findings


# ---------------------------------------------------------------------------
# URLs
# ---------------------------------------------------------------------------

def scan_url(
    url: str,
    *,
    approved_domains: Optional[Iterable[str]] = None,
    registry: Optional[SecretRegistry] = None,
    content_labels: LabelSet = EMPTY_LABELS,
) -> list[Finding]:
    """Scan one URL for exfil channels.

    Reports UnapprovedDomain when an allowlist is given and the host is off
    it (or the URL does not parse), EncodedSecret when any registered secret
    appears in the URL under any tracked encoding, and TaintedUrlParam when
    the URL carries a query string while the surrounding content is labeled:
    query parameters are the classic carrier for data the author of the URL
    should not have been able to see.
    """
    findings: list[Finding] = []
    try:
        parts = urlsplit(url)
        host = (parts.hostname or "").lower()
    except ValueError:
        parts = None
        host = ""
    if approved_domains is not None:
        allow = {d.lower() for d in approved_domains}
        if not host or host not in allow:
            findings.append(
                Finding(
                    FindingKind.UNAPPROVED_DOMAIN,
                    f"host {host or '<unparseable>'} is not on the approved-domain list",
                    payload=host or None,
                )
            )
    if registry is not None:
        for source_id, encoding in registry.find_in_text(url):
            findings.append(
                Finding(
                    FindingKind.ENCODED_SECRET,
                    f"secret {source_id} present in URL ({encoding} encoding)",
                    payload=f"{source_id}:{encoding}",
                )
            )
    if parts is not None and parts.query and content_labels:
        findings.append(
            Finding(
                FindingKind.TAINTED_URL_PARAM,
                "URL query parameters built from labeled data",
                payload=parts.query,
            )
        )
    return findings


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

# Commands whose first network action is a DNS resolution of an
# attacker-controllable name, before any allowlist can see a URL.
RESOLVER_COMMANDS = frozenset({"ping", "nslookup", "dig", "curl", "wget"})

_FLAG_RE = re.compile(r"^-")


def _command_hosts(argv: list[str]) -> list[str]:
    hosts: list[str] = []
    for tok in argv[1:]:
        if _FLAG_RE.match(tok):
            continue
        if "://" in tok:
            try:
                h = urlsplit(tok).hostname
            except ValueError:
                h = None
            if h:
                hosts.append(h.lower())
        elif "." in tok and " " not in tok:
            hosts.append(tok.lower())
    return hosts


def scan_command(
    argv: list[str],
    *,
    registry: Optional[SecretRegistry] = None,
    approved_domains: Optional[Iterable[str]] = None,
) -> list[Finding]:
    """Scan a shell command for DNS/URL exfiltration.

    For the resolver commands (ping, nslookup, dig, curl, wget) a registered
    secret inside a resolved hostname is DnsExfil: the lookup itself leaks,
    no connection needed.  Secrets elsewhere in the command are
    EncodedSecret, and off-allowlist hosts are UnapprovedDomain.
    """
    findings: list[Finding] = []
    if not argv:
        return findings
    cmd = argv[0].rsplit("/", 1)[-1].lower()
    hosts = _command_hosts(argv)
    if cmd in RESOLVER_COMMANDS and registry is not None:
        for host in hosts:
            for source_id, encoding in registry.find_in_text(host):
                findings.append(
                    Finding(
                        FindingKind.DNS_EXFIL,
                        f"hostname resolves with secret {source_id} embedded ({encoding})",
                        payload=host,
                    )
                )
    if registry is not None:
        joined = " ".join(argv)
        for source_id, encoding in registry.find_in_text(joined):
            findings.append(
                Finding(
                    FindingKind.ENCODED_SECRET,
                    f"secret {source_id} present in command ({encoding} encoding)",
                    payload=f"{source_id}:{encoding}",
                )
            )
    if approved_domains is not None and cmd in RESOLVER_COMMANDS:
        allow = {d.lower() for d in approved_domains}
        for host in hosts:
            if host not in allow:
                findings.append(
                    Finding(
                        FindingKind.UNAPPROVED_DOMAIN,
                        f"host {host} is not on the approved-domain list",
                        payload=host,
                    )
                )
    return findings


# ---------------------------------------------------------------------------
# Markdown images
# ---------------------------------------------------------------------------

_MD_IMAGE_RE = re.compile(r"!\[[^\]]*\]\(\s*(<[^>]*>|[^)\s]+)[^)]*\)")


def scan_markdown_images(
    markdown: str,
    *,
    untrusted_origin: bool = False,
    approved_domains: Optional[Iterable[str]] = None,
    registry: Optional[SecretRegistry] = None,
    content_labels: LabelSet = EMPTY_LABELS,
) -> list[Finding]:
    """Scan markdown for auto-fetching image URLs.

    Rendering an image is a zero-click network request, so each URL gets the
    full URL scan; when the markdown came from an untrusted origin every
    image additionally reports UntrustedImageOrigin.
    """
    findings: list[Finding] = []
    for m in _MD_IMAGE_RE.finditer(markdown):
        url = m.group(1).strip("<>")
        if untrusted_origin:
            findings.append(
                Finding(
                    FindingKind.UNTRUSTED_IMAGE_ORIGIN,
                    "image markup from an untrusted origin",
                    span=m.span(),
                    payload=url,
                )
            )
        findings.extend(
            scan_url(
                url,
                approved_domains=approved_domains,
                registry=registry,
                content_labels=content_labels,
            )
        )
    return findings
