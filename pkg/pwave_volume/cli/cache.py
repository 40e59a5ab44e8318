"""On-disk result cache keyed by a content hash of the full request"""

import hashlib
import logging
import os
from datetime import datetime
from pathlib import Path

from sqlalchemy import Column, DateTime, String, Text, create_engine
from sqlalchemy.orm import Session, declarative_base

from pwave_volume.cli.config import CACHE_ENV

_ENGINE_STORE = {}
LOGGER = logging.getLogger(__name__)

Base = declarative_base()


class CachedResult(Base):
    __tablename__ = "results"

    key = Column(String(64), primary_key=True, comment="request hash")
    command = Column(String(64), nullable=False, comment="subcommand name")
    payload = Column(Text, nullable=False, comment="rendered output")
    created = Column(DateTime, default=datetime.utcnow, comment="insertion time")


def cache_directory(configured=None):
    """Flag or config value, then $PWAVE_VOLUME_CACHE, then ~/.cache/pwave_volume"""
    directory = configured or os.environ.get(CACHE_ENV)
    if directory:
        return Path(directory)
    return Path.home() / ".cache" / "pwave_volume"


def request_key(command, digest, *extra):
    text = "\n".join([command, digest, *(str(item) for item in extra)])
    return hashlib.sha256(text.encode("utf8")).hexdigest()


class ResultCache:
    """SQLite store of rendered results"""

    def __init__(self, directory):
        """
        :param directory: cache directory, created when missing
        """
        self.directory = Path(directory)
        self._engine = self._get_engine()
        LOGGER.debug("Cache: {}".format(repr(self._engine.url)))

    def _get_engine(self):
        # one engine per database file
        url = f"sqlite:///{self.directory / 'results.sqlite'}"
        try:
            engine = _ENGINE_STORE[url]
        except KeyError:
            self.directory.mkdir(parents=True, exist_ok=True)
            engine = create_engine(url, future=True)
            Base.metadata.create_all(engine)
            _ENGINE_STORE[url] = engine
        return engine

    def get(self, key):
        with Session(self._engine) as session:
            item = session.get(CachedResult, key)
            if item is None:
                LOGGER.debug("Cache miss: {}".format(key))
                return None
            LOGGER.debug("Cache hit: {}".format(key))
            return item.payload

    def put(self, key, command, payload):
        with Session(self._engine) as session:
            session.merge(CachedResult(key=key, command=command, payload=payload))
            session.commit()
