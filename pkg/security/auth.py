"""
Front-door authorization for bot commands.

The C&C channel is trusted (membership is the access control); only the
user-facing side of a bot checks who is talking to it.
"""

import logging
from typing import Iterable

from security.validation import split_user_handle

logger = logging.getLogger(__name__)


class Unauthorized(PermissionError):
    """Raised when a user outside the admin list issues a command."""

    def __init__(self, user: str, bot: str) -> None:
        super().__init__(f"User {user!r} is not allowed to command {bot!r}")
        self.user = user
        self.bot = bot


class AdminAllowlist:
    """Flat allowlist of user handles. An empty list leaves the bot open."""

    def __init__(self, admins: Iterable[str]) -> None:
        self.admins = frozenset(admin.strip() for admin in admins if admin.strip())

    def is_allowed(self, user: str) -> bool:
        if not self.admins:
            return True
        name, _ = split_user_handle(user)
        return user in self.admins or name in self.admins

    def require(self, user: str, bot: str) -> None:
        if not self.is_allowed(user):
            logger.warning("Rejected command from %s on bot %s", user, bot)
            raise Unauthorized(user, bot)
