"""Two-factor authentication: password check, then an out-of-band one-time key.

Factor one verifies a salted-PBKDF2 password hash; factor two mails a fresh
6-digit key to the account's contact address through the email spool sink and
verifies it with constant-time comparison. Only the success path of the key
check ever mints a session token. Every state transition is audit-logged.
"""

import hashlib
import hmac
import json
import logging
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AccountLocked,
    AuthFailed,
    InvalidToken,
    KeyExhausted,
    KeyExpired,
    KeyMismatch,
    UnknownLogin,
    UsernameTaken,
    WeakPassword,
)
from .store import EntryKind, EventStore

logger = logging.getLogger(__name__)

KEY_DIGITS = 6
KEY_SPACE = 10**KEY_DIGITS
SALT_BYTES = 16
TOKEN_BYTES = 16  # 128 bits


@dataclass
class AuthConfig:
    min_password_len: int = 8
    kdf_iterations: int = 100_000
    key_ttl_ms: int = 300_000
    key_attempts: int = 3
    lockout_threshold: int = 5
    lockout_ms: int = 900_000
    token_ttl_ms: int = 3_600_000


@dataclass
class UserRecord:
    username: str
    pass_hash: bytes
    salt: bytes
    contact: str
    kdf_iterations: int
    failed_logins: int = 0
    locked_until: int | None = None


@dataclass
class OneTimeKey:
    value: str
    issued_at: int
    ttl_ms: int
    attempts_left: int


@dataclass
class PendingLogin:
    login_id: str
    username: str
    key: OneTimeKey
    created_at: int


@dataclass
class SessionToken:
    value: str
    username: str
    issued_at: int
    ttl_ms: int


@dataclass
class AuthAuditEntry:
    timestamp: int
    username: str
    action: str  # Register|PasswordOk|PasswordFail|KeyIssued|KeyOk|KeyFail|SessionIssued|Lockout|Logout
    detail: str = ""


def _kdf(password: str, salt: bytes, iterations: int) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)


class AuthService:
    """Single-writer auth state machine; token validation is a pure read."""

    def __init__(
        self,
        store: EventStore,
        email_sink,
        clock,
        config: AuthConfig | None = None,
        users_path: str | Path | None = None,
    ):
        self.store = store
        self.email_sink = email_sink
        self.clock = clock
        self.config = config or AuthConfig()
        self.users_path = Path(users_path) if users_path else None
        self._users: dict[str, UserRecord] = {}
        self._pending: dict[str, PendingLogin] = {}
        self._pending_by_user: dict[str, str] = {}
        self._sessions: dict[str, SessionToken] = {}
        self._lock = threading.RLock()
        if self.users_path and self.users_path.exists():
            self._load_users()

    # -- user record persistence (survives CLI invocations) --

    def _load_users(self) -> None:
        raw = json.loads(self.users_path.read_text(encoding="utf-8"))
        for name, rec in raw.items():
            self._users[name] = UserRecord(
                username=name,
                pass_hash=bytes.fromhex(rec["pass_hash"]),
                salt=bytes.fromhex(rec["salt"]),
                contact=rec["contact"],
                kdf_iterations=rec["kdf_iterations"],
                failed_logins=rec.get("failed_logins", 0),
                locked_until=rec.get("locked_until"),
            )

    def _save_users(self) -> None:
        if not self.users_path:
            return
        data = {
            u.username: {
                "pass_hash": u.pass_hash.hex(),
                "salt": u.salt.hex(),
                "contact": u.contact,
                "kdf_iterations": u.kdf_iterations,
                "failed_logins": u.failed_logins,
                "locked_until": u.locked_until,
            }
            for u in self._users.values()
        }
        self.users_path.parent.mkdir(parents=True, exist_ok=True)
        self.users_path.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")

    def _audit(self, username: str, action: str, detail: str = "", now: int | None = None) -> None:
        ts = self.clock.now_ms() if now is None else now
        self.store.append(
            EntryKind.AUTH_AUDIT,
            {"username": username, "action": action, "detail": detail},
            ts=ts,
        )

    # -- operations --

    def register_user(self, username: str, password: str, contact: str) -> UserRecord:
        if len(password) < self.config.min_password_len:
            raise WeakPassword(f"password must be at least {self.config.min_password_len} chars")
        with self._lock:
            if username in self._users:
                raise UsernameTaken(username)
            salt = secrets.token_bytes(SALT_BYTES)
            record = UserRecord(
                username=username,
                pass_hash=_kdf(password, salt, self.config.kdf_iterations),
                salt=salt,
                contact=contact,
                kdf_iterations=self.config.kdf_iterations,
            )
            self._users[username] = record
            self._save_users()
            self._audit(username, "Register", contact)
            return record

    def begin_login(self, username: str, password: str, now: int | None = None) -> PendingLogin:
        """Factor one. On a password match a fresh one-time key is mailed to the
        account contact; the key value never appears in the returned object's
        API projection, only in the out-of-band message.
        """
        if now is None:
            now = self.clock.now_ms()
        with self._lock:
            user = self._users.get(username)
            if user is None:
                # Same externally visible failure as a bad password.
                raise AuthFailed("bad credentials")
            if user.locked_until is not None:
                if now < user.locked_until:
                    raise AccountLocked(f"locked until {user.locked_until}")
                user.locked_until = None
                user.failed_logins = 0
            guess = _kdf(password, user.salt, user.kdf_iterations)
            if not hmac.compare_digest(guess, user.pass_hash):
                user.failed_logins += 1
                self._audit(username, "PasswordFail", f"consecutive={user.failed_logins}", now)
                if user.failed_logins >= self.config.lockout_threshold:
                    user.locked_until = now + self.config.lockout_ms
                    self._audit(username, "Lockout", f"until={user.locked_until}", now)
                self._save_users()
                raise AuthFailed("bad credentials")
            if user.failed_logins:
                user.failed_logins = 0
                self._save_users()

            # One usable key per user: a newer login invalidates the older one.
            old_id = self._pending_by_user.pop(username, None)
            if old_id is not None:
                self._pending.pop(old_id, None)

            login_id = secrets.token_hex(8)
            key = OneTimeKey(
                value=f"{secrets.randbelow(KEY_SPACE):0{KEY_DIGITS}d}",
                issued_at=now,
                ttl_ms=self.config.key_ttl_ms,
                attempts_left=self.config.key_attempts,
            )
            pending = PendingLogin(login_id=login_id, username=username, key=key, created_at=now)
            self._pending[login_id] = pending
            self._pending_by_user[username] = login_id
            self._audit(username, "PasswordOk", login_id, now)
            self.email_sink.deliver(f"TO: {user.contact}\nLOGIN: {login_id}\nKEY: {key.value}\n")
            self._audit(username, "KeyIssued", login_id, now)
            return pending

    def verify_key(self, login_id: str, key_guess: str, now: int | None = None) -> SessionToken:
        """Factor two. Constant-time comparison; three strikes or TTL expiry
        invalidate the pending login and force a restart from begin_login.
        """
        if now is None:
            now = self.clock.now_ms()
        with self._lock:
            pending = self._pending.get(login_id)
            if pending is None:
                raise UnknownLogin(login_id)
            key = pending.key
            if now > key.issued_at + key.ttl_ms:
                self._drop_pending(pending)
                self._audit(pending.username, "KeyFail", f"{login_id} expired", now)
                raise KeyExpired(login_id)
            ok = hmac.compare_digest(key.value.encode(), str(key_guess).encode())
            if not ok:
                key.attempts_left -= 1
                self._audit(
                    pending.username, "KeyFail", f"{login_id} attempts_left={key.attempts_left}", now
                )
                if key.attempts_left <= 0:
                    self._drop_pending(pending)
                    raise KeyExhausted(login_id)
                raise KeyMismatch(login_id)
            self._drop_pending(pending)
            self._audit(pending.username, "KeyOk", login_id, now)
            token = SessionToken(
                value=secrets.token_urlsafe(TOKEN_BYTES),
                username=pending.username,
                issued_at=now,
                ttl_ms=self.config.token_ttl_ms,
            )
            self._sessions[token.value] = token
            self._audit(pending.username, "SessionIssued", login_id, now)
            return token

    def _drop_pending(self, pending: PendingLogin) -> None:
        self._pending.pop(pending.login_id, None)
        if self._pending_by_user.get(pending.username) == pending.login_id:
            del self._pending_by_user[pending.username]

    def validate_token(self, value: str, now: int | None = None) -> str:
        """Bound username iff the token exists, is unexpired and unrevoked."""
        if now is None:
            now = self.clock.now_ms()
        with self._lock:
            token = self._sessions.get(value)
        if token is None or now > token.issued_at + token.ttl_ms:
            raise InvalidToken()
        return token.username

    def logout(self, value: str) -> bool:
        """Revoke a token if it exists; idempotent, True when a revocation happened."""
        with self._lock:
            token = self._sessions.pop(value, None)
            if token is not None:
                self._audit(token.username, "Logout", "")
                return True
            return False

    # -- introspection helpers --

    def user(self, username: str) -> UserRecord | None:
        with self._lock:
            return self._users.get(username)

    def has_user(self, username: str) -> bool:
        with self._lock:
            return username in self._users
