import os
import sqlite3
from typing import Iterable, List, Optional

from bench import ExperimentRecord
from config import Config


class ResultStore:
    """SQLite store for benchmark records, one table keyed by run"""

    def __init__(self, path: Optional[str] = None):
        self.path = path or Config.RESULTS_DB_PATH
        if self.path != ":memory:":
            os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
        self.connection = sqlite3.connect(self.path)
        self.create_tables()

    def create_tables(self):
        """Create database tables"""
        cursor = self.connection.cursor()

        # Runs table
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                label TEXT,
                config TEXT,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        ''')

        # Records table
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS records (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER,
                d INTEGER NOT NULL,
                rho REAL NOT NULL,
                family TEXT NOT NULL,
                matrix_index INTEGER NOT NULL,
                tau REAL,
                lambda_min REAL,
                repaired INTEGER DEFAULT 0,
                seed INTEGER NOT NULL,
                wall_time REAL,
                error TEXT,
                FOREIGN KEY (run_id) REFERENCES runs(id) ON DELETE CASCADE
            )
        ''')

        self.connection.commit()

    def execute_query(self, query: str, params: tuple = None):
        """Execute a database query"""
        cursor = self.connection.cursor()
        try:
            if params:
                cursor.execute(query, params)
            else:
                cursor.execute(query)
            return cursor
        except sqlite3.Error as e:
            print(f"❌ Database query error: {e}")
            self.connection.rollback()
            raise

    def fetch_all(self, query: str, params: tuple = None):
        cursor = self.execute_query(query, params)
        return cursor.fetchall()

    def insert(self, query: str, params: tuple = None):
        cursor = self.execute_query(query, params)
        self.connection.commit()
        return cursor.lastrowid

    def start_run(self, label: str, config_json: str) -> int:
        return self.insert("INSERT INTO runs (label, config) VALUES (?, ?)", (label, config_json))

    def save_records(self, run_id: int, records: Iterable[ExperimentRecord]) -> int:
        """Store one run's records; tau is NULL for failed entries"""
        rows = [
            (run_id, r.d, r.rho, r.family, r.matrix_index, None if r.failed else r.tau,
             None if r.failed else r.lambda_min, int(r.repaired), r.seed, r.wall_time, r.error or None)
            for r in records
        ]
        self.connection.executemany('''
            INSERT INTO records
            (run_id, d, rho, family, matrix_index, tau, lambda_min, repaired, seed, wall_time, error)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', rows)
        self.connection.commit()
        return len(rows)

    def load_records(self, run_id: int) -> List[ExperimentRecord]:
        rows = self.fetch_all('''
            SELECT d, rho, family, matrix_index, tau, lambda_min, repaired, seed, wall_time, error
            FROM records WHERE run_id = ? ORDER BY d, rho, family, matrix_index
        ''', (run_id,))
        return [
            ExperimentRecord(d, rho, family, index, float("nan") if tau is None else tau,
                             float("nan") if lam is None else lam, bool(repaired), seed,
                             wall_time or 0.0, error or "")
            for d, rho, family, index, tau, lam, repaired, seed, wall_time, error in rows
        ]

    def list_runs(self):
        return self.fetch_all("SELECT id, label, created_at FROM runs ORDER BY id")

    def close(self):
        """Close database connection"""
        if self.connection:
            self.connection.close()
            self.connection = None
