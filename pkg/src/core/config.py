import os
from logging import config as logging_config
from typing import Optional

from pydantic import BaseSettings, validator

from src.core.logger import build_logging


class Settings(BaseSettings):
    """The settings class that the pydantic uses to work with environment variables."""

    PROJECT_NAME: str = 'semiblind-separation'
    PROJECT_VERSION: str = '0.1.0'
    OUTPUT_DIR: str = 'results'
    THREADS: Optional[int] = None
    LOG_LEVEL: str = 'INFO'

    class Config:
        env_prefix = 'SEMIBLIND_'
        env_file = './src/core/.env'

    @validator('THREADS', always=True)
    def default_threads(cls, value: Optional[int]) -> int:
        if value is None:
            return os.cpu_count() or 1
        if value < 1:
            raise ValueError('THREADS must be a positive integer')
        return value

    @validator('LOG_LEVEL')
    def upper_level(cls, value: str) -> str:
        return value.upper()


settings = Settings()


def configure_logging(level: Optional[str] = None) -> None:
    logging_config.dictConfig(build_logging(level or settings.LOG_LEVEL))


# Применяем настройки логирования
configure_logging()

# Настройки запуска
PROJECT_NAME = settings.PROJECT_NAME
PROJECT_VERSION = settings.PROJECT_VERSION
OUTPUT_DIR = settings.OUTPUT_DIR
THREADS = settings.THREADS

