import csv
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

# CSV の数値は 17 桁で書き出す (同じ設定なら同じバイト列)
SIGNIFICANT_DIGITS = 17


def format_float(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def parse_complex(value: Any) -> complex:
    """'1+2j', '1+2i', 1.5, [re, im], {'re': .., 'im': ..} を複素数にする"""
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and set(value) == {'re', 'im'}:
        return complex(float(value['re']), float(value['im']))
    if isinstance(value, str):
        text = value.strip().replace(' ', '').replace('i', 'j')
        return complex(text)
    raise ValueError(f"cannot interpret {value!r} as a complex number")


def parse_float_list(value: str) -> List[float]:
    return [float(item) for item in value.split(',') if item.strip()]


def write_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(row.get(column)) for column in columns])


def with_suffix(path: Optional[str], suffix: str) -> Optional[str]:
    """出力ファイル名から付随ファイル名を作る (out.csv -> out.json)"""
    if path is None:
        return None
    stem, dot, _ = path.rpartition('.')
    return f"{stem}{suffix}" if dot else f"{path}{suffix}"
