"""FastAPI surface of a live bot: health, front-channel routes and, when hosted here, the broker."""

from __future__ import annotations

import logging
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from core.channel import Cursor, InvalidBody, MemoryChannel
from core.runtime import BotRuntime
from security.validation import sanitize_user_line

logger = logging.getLogger(__name__)

MAX_READ_LIMIT = 256


class AttachRequest(BaseModel):
    bot: str


class PostRequest(BaseModel):
    author: str
    body: str
    now: int = 0


class SayRequest(BaseModel):
    user: str
    text: str


def create_app(runtime: BotRuntime, background: bool = True) -> FastAPI:
    """Build the API around ``runtime``; ``background=False`` leaves ticking to the caller."""

    api = FastAPI(title=f"fedbot {runtime.name}")

    @api.on_event("startup")
    def start_services() -> None:
        logger.info("Starting bot %s", runtime.name)
        if background:
            runtime.start_loop()
        else:
            runtime.start()

    @api.on_event("shutdown")
    def stop_services() -> None:
        logger.info("Stopping bot %s", runtime.name)
        runtime.stop()

    @api.get("/health")
    def health_check() -> dict:
        return {"ok": True, "bot": runtime.name, "tick": runtime.tick, "broker": runtime.hosts_broker}

    def _bot_or_404(name: str):
        if name != runtime.name or runtime.bot is None:
            raise HTTPException(status_code=404, detail=f"Unknown bot {name}")
        return runtime.bot

    @api.post("/bots/{name}/say")
    def say(name: str, request: SayRequest) -> dict:
        bot = _bot_or_404(name)
        try:
            text = sanitize_user_line(request.text)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if not bot.allowlist.is_allowed(request.user):
            logger.warning("Refused line from %s for %s", request.user, name)
            raise HTTPException(status_code=403, detail="Access denied")
        runtime.say(request.user, text)
        return {"queued": True}

    @api.get("/bots/{name}/outbox")
    def outbox(name: str, user: Optional[str] = None, after: int = Query(0, ge=0)) -> dict:
        _bot_or_404(name)
        entries = runtime.deliveries(user=user, after=after)
        next_index = entries[-1].index + 1 if entries else after
        return {"deliveries": [entry.to_dict() for entry in entries], "next": next_index}

    @api.get("/bots/{name}/bots")
    def list_bots(name: str) -> dict:
        bot = _bot_or_404(name)
        return {"bots": [info._asdict() for info in bot.list_bots()]}

    channel = runtime.channel
    if isinstance(channel, MemoryChannel):
        _add_broker_routes(api, channel)

    return api


def _add_broker_routes(api: FastAPI, channel: MemoryChannel) -> None:
    @api.get("/channel")
    def channel_info() -> dict:
        return {"has_memory": channel.config.has_memory, "size": len(channel)}

    @api.post("/channel/attach")
    def attach(request: AttachRequest) -> dict:
        cursor = channel.attach(request.bot)
        return {"next_id": cursor.next_id, "origin": cursor.origin}

    @api.post("/channel/messages")
    def post_message(request: PostRequest) -> dict:
        try:
            message_id = channel.post(request.author, request.body, request.now)
        except InvalidBody as exc:
            logger.warning("%s", exc)
            raise HTTPException(status_code=400, detail=str(exc))
        return {"id": message_id}

    @api.get("/channel/messages")
    def read_messages(next_id: int = Query(0, ge=0), limit: int = Query(16, ge=1, le=MAX_READ_LIMIT)) -> dict:
        cursor = Cursor(owner="remote", next_id=next_id)
        messages = channel.read(cursor, limit)
        return {"messages": [message.to_dict() for message in messages], "next_id": cursor.next_id}

    @api.delete("/channel/messages/{message_id}")
    def delete_message(message_id: int, bot: str) -> dict:
        return {"claimed": channel.try_delete(bot, message_id)}

    @api.get("/channel/history")
    def history(from_id: int = Query(0, ge=0)) -> dict:
        return {"messages": [message.to_dict() for message in channel.history(from_id)]}
