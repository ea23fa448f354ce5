"""
Flow Cache Manager
Persists estimated optical flow for a frame directory and reuses it while the
frames and Horn-Schunck parameters are unchanged
"""
import hashlib
import json
import logging
from dataclasses import asdict
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .core import FlowField
from .flow import HSParams, estimate_flow_sequence
from .io import list_frame_files, load_frames
from .settings import get_cache_dir

logger = logging.getLogger(__name__)


class FlowCacheManager:
    """Manages on-disk flow fields keyed by frame content hashes"""

    def __init__(self, cache_dir: Optional[str] = None):
        self.cache_dir = Path(cache_dir or get_cache_dir())
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.metadata_file = self.cache_dir / "metadata.json"
        self.flows_file = self.cache_dir / "flows.npz"
        self.flows: List[FlowField] = []
        self.metadata = self._load_metadata()

    @staticmethod
    def _empty_metadata() -> Dict:
        return {"files": {}, "last_updated": None, "params": None}

    def _load_metadata(self) -> Dict:
        """Load metadata about cached flow"""
        if self.metadata_file.exists():
            try:
                with open(self.metadata_file, 'r', encoding='utf-8') as f:
                    return json.load(f)
            except Exception as e:
                logger.error(f"[ERROR] Failed to load cache metadata: {e}")
        return self._empty_metadata()

    def _save_metadata(self):
        self.metadata["last_updated"] = datetime.now().isoformat()
        try:
            with open(self.metadata_file, 'w', encoding='utf-8') as f:
                json.dump(self.metadata, f, indent=2)
        except Exception as e:
            logger.error(f"[ERROR] Failed to save cache metadata: {e}")

    @staticmethod
    def _get_file_hash(file_path: Path) -> str:
        """MD5 of file content"""
        try:
            with open(file_path, 'rb') as f:
                return hashlib.md5(f.read()).hexdigest()
        except Exception as e:
            logger.error(f"[ERROR] Failed to hash {file_path}: {e}")
            return ""

    def _frame_hashes(self, folder_path: str) -> Dict[str, str]:
        return {path.name: self._get_file_hash(path) for path in list_frame_files(folder_path)}

    def _is_cache_valid(self, folder_path: str, params: HSParams) -> bool:
        """Cached flow is valid when every frame file and the parameters are unchanged"""
        if not self.flows_file.exists():
            return False
        if self.metadata.get("params") != asdict(params):
            return False
        return self._frame_hashes(folder_path) == self.metadata.get("files", {})

    def build_from_folder(self, folder_path: str, params: HSParams = HSParams(),
                          show_progress: bool = False) -> List[FlowField]:
        """
        Flow fields for a frame directory, using the cache when valid

        Args:
            folder_path: Directory of frames, read in lexicographic order
            params: Horn-Schunck parameters
            show_progress: Show a progress bar while estimating

        Returns:
            N-1 flow fields for N frames
        """
        if self._is_cache_valid(folder_path, params):
            logger.info("[CACHE] Loading flow from cache...")
            flows = self._load_from_cache()
            if flows:
                return flows

        logger.info(f"[REFRESH] Estimating flow for {folder_path}")
        frames = load_frames(folder_path)
        flows = estimate_flow_sequence(frames, params, show_progress=show_progress)

        self.metadata["files"] = self._frame_hashes(folder_path)
        self.metadata["params"] = asdict(params)
        self._save_to_cache(flows)
        self._save_metadata()
        self.flows = flows
        return flows

    def _save_to_cache(self, flows: List[FlowField]):
        try:
            u = np.stack([f.u for f in flows])
            v = np.stack([f.v for f in flows])
            with open(self.flows_file, 'wb') as f:
                np.savez(f, u=u, v=v)
            logger.info(f"[SAVED] Cached {len(flows)} flow fields")
        except Exception as e:
            logger.error(f"[ERROR] Failed to save flow cache: {e}")

    def _load_from_cache(self) -> List[FlowField]:
        try:
            with np.load(self.flows_file) as data:
                self.flows = [FlowField(u, v) for u, v in zip(data["u"], data["v"])]
            logger.info(f"[LOADED] Loaded {len(self.flows)} flow fields from cache")
            return self.flows
        except Exception as e:
            logger.error(f"[ERROR] Failed to load flow cache: {e}")
            return []

    def clear_cache(self):
        """Remove cached flow and metadata"""
        try:
            if self.flows_file.exists():
                self.flows_file.unlink()
            if self.metadata_file.exists():
                self.metadata_file.unlink()
            self.flows = []
            self.metadata = self._empty_metadata()
            logger.info("[OK] Cache cleared")
        except Exception as e:
            logger.error(f"[ERROR] Failed to clear cache: {e}")

    def get_cache_stats(self) -> Dict:
        return {
            "num_flows": len(self.flows),
            "cache_dir": str(self.cache_dir),
            "metadata": self.metadata,
            "cache_exists": self.flows_file.exists(),
        }
