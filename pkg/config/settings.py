import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(dotenv_path=env_path)


def _env_flag(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


class Settings:
    """Application settings loaded from environment variables"""

    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO')

    # Worker cap for per-image AEMD evaluation; 1 keeps runs bit-reproducible
    SES_THREADS: int = int(os.getenv('SES_THREADS', '1'))

    # NaN/Inf assertion on every autograd op output
    CHECK_FINITE: bool = _env_flag('SES_CHECK_FINITE', 'true')

    # Exact transport solver
    EMD_MAX_ITER: int = int(os.getenv('SES_EMD_MAX_ITER', '1000000'))

    # AEMD harness: how often a transform is redrawn when no center survives it
    AEMD_MAX_RETRIES: int = int(os.getenv('SES_AEMD_MAX_RETRIES', '20'))

    METRICS_FILE: str = os.getenv('SES_METRICS_FILE', 'metrics.jsonl')

    def __repr__(self) -> str:
        return (f"Settings(threads={self.SES_THREADS}, check_finite={self.CHECK_FINITE}, "
                f"log_level={self.LOG_LEVEL})")


settings = Settings()
