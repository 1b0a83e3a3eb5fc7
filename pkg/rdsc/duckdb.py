import duckdb
import pyarrow


CON = duckdb.connect(':memory:', config={'threads': 1})


def execute_sql(sql: str, params: list | None = None, tables: dict[str, pyarrow.Table] | None = None) -> pyarrow.Table:
    cur = CON.cursor()
    try:
        for name, table in (tables or {}).items():
            cur.register(name, table)
        cur.execute(sql, params)
        return cur.fetch_arrow_table()
    finally:
        cur.close()
