import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

LOG_ENV = 'DDQ_LOG'
LOG_LEVELS = {
    'error': logging.ERROR,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}


def level_from_env(default: str = 'info') -> int:
    """環境変数 DDQ_LOG からログレベルを決める"""
    name = os.environ.get(LOG_ENV, default).strip().lower()
    if name not in LOG_LEVELS:
        logging.getLogger('cli').warning(f"Unknown {LOG_ENV} value '{name}', falling back to {default}")
        return LOG_LEVELS[default]
    return LOG_LEVELS[name]


def setup_logging(log_dir: Optional[str] = "logs", log_level=None):
    """ロギングを設定する"""
    if log_level is None:
        log_level = level_from_env()

    # ルートロガーの設定
    logger = logging.getLogger()
    logger.setLevel(log_level)
    for handler in list(logger.handlers):
        if getattr(handler, '_ddq', False):
            logger.removeHandler(handler)
            handler.close()

    # フォーマッタ
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    # ファイルハンドラ (ローテーション付き)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            os.path.join(log_dir, 'ddq.log'),
            maxBytes=10*1024*1024,  # 10MB
            backupCount=5
        )
        file_handler.setFormatter(formatter)
        file_handler._ddq = True
        logger.addHandler(file_handler)

    # コンソールハンドラ (stdout は CSV 用に空けておく)
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler._ddq = True
    logger.addHandler(console_handler)

    return logger