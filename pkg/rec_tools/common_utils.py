"""
REC 工具公共模块

提供所有模块共用的配置管理、日志、文件读写等基础功能
"""

import os
import sys
import json
import logging
from pathlib import Path
from typing import Optional, Dict, Any, Iterable

import pandas as pd

_TRUTHY = {"1", "true", "yes", "on"}


class RecSimConfig:
    """recsim 配置管理器（环境变量 + 本地数据目录）"""

    def __init__(self):
        self.project_root = self._get_project_root()
        self.local_data_path = self.project_root / "local_data"
        self.bench_path = self.local_data_path / "bench"
        self.codes_path = self.local_data_path / "codes"
        self.stretch_path = self.local_data_path / "stretch"
        self.logs_path = self.local_data_path / "logs"

        # 环境变量
        self.threads = self._read_threads()
        self.debug = os.getenv("RECSIM_DEBUG", "").strip().lower() in _TRUTHY
        self.log_level = os.getenv("RECSIM_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"
        self.mi_cap_bits = self._read_float("RECSIM_MI_CAP", 8.0)

    def _get_project_root(self) -> Path:
        """获取项目根目录"""
        current_file = Path(__file__).absolute()
        return current_file.parent.parent

    @staticmethod
    def _read_threads() -> int:
        default = min(8, os.cpu_count() or 1)
        raw = os.getenv("RECSIM_THREADS")
        if not raw:
            return default
        try:
            return max(1, int(raw))
        except ValueError:
            print(f"[Config] Ignoring RECSIM_THREADS={raw!r}", file=sys.stderr, flush=True)
            return default

    @staticmethod
    def _read_float(name: str, default: float) -> float:
        raw = os.getenv(name)
        if not raw:
            return default
        try:
            return float(raw)
        except ValueError:
            print(f"[Config] Ignoring {name}={raw!r}", file=sys.stderr, flush=True)
            return default

    def output_dir(self, kind: str) -> Path:
        """输出类别 → local_data 下的子目录"""
        dirs = {"bench": self.bench_path, "codes": self.codes_path,
                "stretch": self.stretch_path, "logs": self.logs_path}
        if kind not in dirs:
            raise ValueError(f"unknown output kind {kind!r}; choose from {', '.join(dirs)}")
        return dirs[kind]

    def resolve_output_path(self, file_path: str, kind: Optional[str] = None) -> str:
        """
        把命令行 / MCP 给出的数据文件路径落到 local_data 下

        参数:
            file_path: 绝对路径原样返回；相对路径一律相对 local_data，
                       多写的 'local_data/' 前缀会被去掉
            kind: 'bench' / 'codes' / 'stretch' / 'logs'；只给文件名时放进该子目录

        返回:
            str: 绝对路径

        异常:
            ValueError: 路径为空、类别未知，或经 '..' 跳出 local_data
        """
        kind_dir = self.output_dir(kind) if kind is not None else None
        text = str(file_path).strip()
        if not text:
            raise ValueError("empty data file path")
        if Path(text).is_absolute():
            return text
        parts = Path(os.path.normpath(text.replace("\\", "/"))).parts
        if parts and parts[0] == "local_data":
            parts = parts[1:]
        if not parts or parts == (".",) or ".." in parts:
            raise ValueError(f"data file path must stay inside local_data: {file_path!r}")
        if kind_dir is not None and len(parts) == 1:
            return str(kind_dir / parts[0])
        return str(self.local_data_path.joinpath(*parts))


def format_csv(frame: pd.DataFrame, header_lines: Iterable[str] = (),
               float_format: Optional[str] = None) -> str:
    """DataFrame → CSV 文本，注释行以 '# ' 开头写在表头之前"""
    head = "".join(f"# {line}\n" for line in header_lines)
    return head + frame.to_csv(index=False, lineterminator="\n", float_format=float_format)


class FileManager:
    """文件管理工具：JSON、CSV 与编码比特文件"""

    def __init__(self, config: RecSimConfig):
        self.config = config

    def _resolve(self, file_path: str, kind: Optional[str] = None) -> str:
        return self.config.resolve_output_path(file_path, kind)

    def load_json_data(self, file_path: str) -> Dict[str, Any]:
        """
        加载JSON数据

        参数:
            file_path: 数据文件路径

        返回:
            Dict: JSON数据，文件不存在或损坏时返回空字典
        """
        file_path = self._resolve(file_path)
        if not os.path.exists(file_path):
            return {}
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (json.JSONDecodeError, IOError) as e:
            print(f"[FileManager] Failed to load JSON: {file_path}: {e}", file=sys.stderr, flush=True)
            return {}

    def save_json_data(self, data: Dict[str, Any], file_path: str, kind: Optional[str] = None) -> str:
        """保存JSON数据，返回实际写入路径"""
        file_path = self._resolve(file_path, kind)
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
        return file_path

    def save_csv(self, frame: pd.DataFrame, file_path: str,
                 header_lines: Iterable[str] = (), float_format: Optional[str] = None,
                 kind: Optional[str] = None) -> str:
        """
        保存 DataFrame 为 CSV

        参数:
            frame: 待保存的表
            file_path: 保存路径
            header_lines: 写在表头之前的注释行（不含 '#'，例如时间戳）
            float_format: 浮点格式，例如 '%.10g'
            kind: 输出类别，只给文件名时决定子目录
        """
        file_path = self._resolve(file_path, kind)
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, 'w', encoding='utf-8', newline='') as f:
            f.write(format_csv(frame, header_lines, float_format))
        return file_path

    def save_bytes(self, payload: bytes, file_path: str, kind: Optional[str] = None) -> str:
        file_path = self._resolve(file_path, kind)
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, 'wb') as f:
            f.write(payload)
        return file_path

    def load_bytes(self, file_path: str, kind: Optional[str] = None) -> bytes:
        file_path = self._resolve(file_path, kind)
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"数据文件不存在: {file_path}")
        with open(file_path, 'rb') as f:
            return f.read()


# 日志
_LOGGER_ROOT = "recsim"
_logging_ready = False


def get_logger(name: str) -> logging.Logger:
    """获取 recsim.<name> 日志器；首次调用时为根日志器挂 stderr handler"""
    global _logging_ready
    root = logging.getLogger(_LOGGER_ROOT)
    if not _logging_ready:
        if not root.handlers:
            handler = logging.StreamHandler(sys.stderr)
            handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
            root.addHandler(handler)
        root.setLevel(getattr(logging, get_config().log_level, logging.WARNING))
        root.propagate = False
        _logging_ready = True
    short = name.rsplit(".", 1)[-1]
    return logging.getLogger(f"{_LOGGER_ROOT}.{short}")


def progress(tag: str, message: str) -> None:
    """长任务进度输出（stderr，不污染 stdout 上的 CSV/JSON）"""
    print(f"[{tag}] {message}", file=sys.stderr, flush=True)


def parse_seed(text: Any) -> int:
    """解析十进制或 0x 十六进制的 64 位种子"""
    if isinstance(text, int):
        value = text
    else:
        s = str(text).strip().lower()
        value = int(s, 16) if s.startswith("0x") else int(s, 10)
    if not 0 <= value < 2 ** 64:
        raise ValueError(f"seed out of 64-bit range: {text}")
    return value


# 全局实例管理
_global_config: Optional[RecSimConfig] = None
_global_file_manager: Optional[FileManager] = None


def get_config() -> RecSimConfig:
    """获取全局配置实例"""
    global _global_config
    if _global_config is None:
        _global_config = RecSimConfig()
    return _global_config


def get_file_manager() -> FileManager:
    """获取全局文件管理器实例"""
    global _global_file_manager
    if _global_file_manager is None:
        _global_file_manager = FileManager(get_config())
    return _global_file_manager


def reset_config() -> None:
    """丢弃缓存的配置（测试中修改环境变量后调用）"""
    global _global_config, _global_file_manager, _logging_ready
    _global_config = None
    _global_file_manager = None
    _logging_ready = False


def debug_enabled() -> bool:
    return get_config().debug
