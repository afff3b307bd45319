"""Result files for sshh-walk runs."""

from .output import Table, read_header, read_table, write_tables

__all__ = ["Table", "read_header", "read_table", "write_tables"]
