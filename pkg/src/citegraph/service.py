"""HTTP service: registration/login with domain-allowlisted accounts, token-
gated citation retrieval, and per-case PDF export over an immutable index."""

from __future__ import annotations

import hashlib
import hmac
import json
import logging
import os
import re
import secrets
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import pdfgen
from .retrieve import RetrievalIndex, RetrieveError, retrieve_citations
from .vectorize import VectorizeError

log = logging.getLogger(__name__)

_EMAIL_RE = re.compile(r"^[^@\s]+@([^@\s]+\.[^@\s]+)$")


class ServiceError(Exception):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    artifacts_dir: str = "artifacts"
    domain_allowlist: tuple[str, ...] = ()   # deny-all until configured
    token_ttl_seconds: int = 24 * 3600
    scrypt_n: int = 2**14
    scrypt_r: int = 8
    scrypt_p: int = 1
    min_password_length: int = 8
    request_log: Optional[str] = None

    @classmethod
    def from_file(cls, path: str | Path, env: Optional[dict] = None) -> "ServiceConfig":
        """JSON config file, then CITEGRAPH_* environment overrides."""
        cfg = cls()
        obj = json.loads(Path(path).read_text(encoding="utf-8")) if path else {}
        service = obj.get("service", obj)
        known = {f for f in cls.__dataclass_fields__}
        overrides = {k: v for k, v in service.items() if k in known}
        if "domain_allowlist" in overrides:
            overrides["domain_allowlist"] = tuple(overrides["domain_allowlist"])
        cfg = replace(cfg, **overrides)
        env = os.environ if env is None else env
        env_map = {
            "CITEGRAPH_HOST": ("host", str),
            "CITEGRAPH_PORT": ("port", int),
            "CITEGRAPH_ARTIFACTS": ("artifacts_dir", str),
            "CITEGRAPH_DOMAINS": ("domain_allowlist", lambda v: tuple(v.split(","))),
            "CITEGRAPH_TOKEN_TTL": ("token_ttl_seconds", int),
        }
        for var, (fname, conv) in env_map.items():
            if var in env:
                cfg = replace(cfg, **{fname: conv(env[var])})
        return cfg


# ---------------------------------------------------------------------------
# accounts

@dataclass(frozen=True)
class UserAccount:
    email: str
    password_digest: str   # scrypt$n$r$p$salthex$digesthex
    created_at: float


class AccountStore:
    """Single-file account store: snapshot plus a replayable journal."""

    def __init__(self, path: str | Path, config: ServiceConfig):
        self.path = Path(path)
        self.journal_path = self.path.with_suffix(self.path.suffix + ".journal")
        self.config = config
        self._lock = threading.Lock()
        self._accounts: dict[str, UserAccount] = {}
        self._load()

    def _load(self) -> None:
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    self._accounts[obj["email"]] = UserAccount(**obj)
        if self.journal_path.exists():
            for line in self.journal_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    self._accounts[obj["email"]] = UserAccount(**obj)
            self._snapshot()

    def _snapshot(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for acc in self._accounts.values():
                fh.write(json.dumps(acc.__dict__) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)
        if self.journal_path.exists():
            self.journal_path.unlink()

    def _hash_password(self, password: str, salt: bytes) -> str:
        c = self.config
        digest = hashlib.scrypt(password.encode("utf-8"), salt=salt,
                                n=c.scrypt_n, r=c.scrypt_r, p=c.scrypt_p)
        return f"scrypt${c.scrypt_n}${c.scrypt_r}${c.scrypt_p}${salt.hex()}${digest.hex()}"

    def register(self, email: str, password: str) -> UserAccount:
        email = email.strip().lower()
        m = _EMAIL_RE.match(email)
        if not m:
            raise ServiceError(f"invalid email address: {email!r}")
        domain = m.group(1)
        if domain not in self.config.domain_allowlist:
            raise ServiceError(
                f"registration restricted to allowlisted domains; {domain!r} is not permitted")
        if len(password) < self.config.min_password_length:
            raise ServiceError(
                f"password must be at least {self.config.min_password_length} characters")
        with self._lock:
            if email in self._accounts:
                raise ServiceError(f"an account already exists for {email}")
            acc = UserAccount(email=email,
                              password_digest=self._hash_password(password, secrets.token_bytes(16)),
                              created_at=time.time())
            # journal first, then fold into the snapshot
            with self.journal_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(acc.__dict__) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._accounts[email] = acc
            self._snapshot()
            return acc

    def verify(self, email: str, password: str) -> bool:
        acc = self._accounts.get(email.strip().lower())
        if acc is None:
            return False
        scheme, n, r, p, salt_hex, digest_hex = acc.password_digest.split("$")
        digest = hashlib.scrypt(password.encode("utf-8"), salt=bytes.fromhex(salt_hex),
                                n=int(n), r=int(r), p=int(p))
        return hmac.compare_digest(digest.hex(), digest_hex)


# ---------------------------------------------------------------------------
# sessions

@dataclass(frozen=True)
class SessionToken:
    token: str
    user: str
    expires_at: float


class SessionStore:
    def __init__(self, ttl_seconds: int, clock=time.time):
        self.ttl = ttl_seconds
        self.clock = clock
        self._tokens: dict[str, SessionToken] = {}

    def issue(self, email: str) -> SessionToken:
        tok = SessionToken(token=secrets.token_hex(16), user=email,
                           expires_at=self.clock() + self.ttl)
        self._tokens[tok.token] = tok
        return tok

    def validate(self, token: str) -> Optional[SessionToken]:
        tok = self._tokens.get(token)
        if tok is None:
            return None
        if tok.expires_at <= self.clock():
            del self._tokens[token]
            return None
        return tok


# ---------------------------------------------------------------------------
# HTTP app

class Credentials(BaseModel):
    email: str
    password: str


class RetrieveRequest(BaseModel):
    description: str


def create_app(index: Optional[RetrievalIndex], config: ServiceConfig,
               accounts: Optional[AccountStore] = None, clock=time.time) -> FastAPI:
    app = FastAPI(title="citegraph", docs_url=None, redoc_url=None)
    if accounts is None:
        accounts = AccountStore(Path(config.artifacts_dir) / "accounts.jsonl", config)
    sessions = SessionStore(config.token_ttl_seconds, clock=clock)
    state = {"index": index}
    log_path = Path(config.request_log) if config.request_log else None

    @app.middleware("http")
    async def request_logger(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        if log_path is not None:
            entry = {"ts": time.time(), "method": request.method,
                     "path": request.url.path, "status": response.status_code,
                     "latency_ms": round(1000 * (time.perf_counter() - start), 3)}
            with log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")
        return response

    def authed(request: Request) -> SessionToken:
        header = request.headers.get("authorization", "")
        token = header[7:] if header.lower().startswith("bearer ") else ""
        if not token:
            token = request.query_params.get("token", "")
        session = sessions.validate(token)
        if session is None:
            raise HTTPException(status_code=401, detail="missing, invalid, or expired token")
        return session

    def active_index() -> RetrievalIndex:
        idx = state["index"]
        if idx is None:
            raise HTTPException(status_code=503, detail="retrieval index unavailable")
        return idx

    @app.post("/api/register")
    def register(creds: Credentials):
        try:
            acc = accounts.register(creds.email, creds.password)
        except ServiceError as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"email": acc.email}

    @app.post("/api/login")
    def login(creds: Credentials):
        # identical failure for unknown email and wrong password
        if not accounts.verify(creds.email, creds.password):
            raise HTTPException(status_code=401, detail="invalid credentials")
        tok = sessions.issue(creds.email.strip().lower())
        return {"token": tok.token, "expires_at": tok.expires_at}

    @app.post("/api/retrieve")
    def retrieve(body: RetrieveRequest, session: SessionToken = Depends(authed)):
        idx = active_index()
        if not body.description.strip():
            raise HTTPException(status_code=400, detail="case description must be nonempty")
        try:
            results = retrieve_citations(idx, body.description)
        except (RetrieveError, VectorizeError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"results": [
            {"id": r.record.id, "case_name": r.record.case_name,
             "justice": r.record.justice, "year": r.record.year,
             "track": r.track, "relevance_pct": r.relevance_pct,
             "pdf_url": f"/api/case/{r.record.id}/pdf"}
            for r in results
        ]}

    @app.get("/api/case/{case_id}/pdf")
    def case_pdf(case_id: str, session: SessionToken = Depends(authed)):
        idx = active_index()
        for rec in idx.records:
            if rec.id == case_id:
                data = pdfgen.case_pdf(rec.case_name, rec.justice, rec.year,
                                       rec.source_url, rec.description)
                return Response(content=data, media_type="application/pdf",
                                headers={"Content-Disposition":
                                         f'attachment; filename="{case_id}.pdf"'})
        raise HTTPException(status_code=404, detail=f"unknown case id {case_id!r}")

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code, content={"error": exc.detail})

    app.state.swap_index = lambda new_index: state.__setitem__("index", new_index)
    app.state.sessions = sessions
    app.state.accounts = accounts
    return app
