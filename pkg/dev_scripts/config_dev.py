import os

from dotenv import load_dotenv

load_dotenv()

DEV_WORKERS = int(os.environ.get("DEV_EPAS_WORKERS", "1"))
DEV_SEED = int(os.environ.get("DEV_EPAS_SEED", "0"))
DEV_SUITE_SIZE = int(os.environ.get("DEV_EPAS_SUITE_SIZE", "12"))


def check_env():
    if DEV_WORKERS < 1 or DEV_SUITE_SIZE < 1:
        raise ValueError("DEV_EPAS_WORKERS and DEV_EPAS_SUITE_SIZE must be positive.")
