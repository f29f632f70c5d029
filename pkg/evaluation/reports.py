"""Report tables: CSV for machines, aligned text for people"""

import csv
import json

from collector.trial_collector import summarize

TABLE_ONE_HEADER = ['Collection', 'Positive', 'Negative', 'Total', 'Grasp Rate']


def write_table_csv(path, header, rows):
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)


def format_table(header, rows):
    cells = [[str(value) for value in header]] + [[_cell(value) for value in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for index, row in enumerate(cells):
        lines.append('  '.join(value.ljust(width) for value, width in zip(row, widths)).rstrip())
        if index == 0:
            lines.append('  '.join('-' * width for width in widths))
    return '\n'.join(lines) + '\n'


def _cell(value):
    if isinstance(value, float):
        return f"{value:.4f}"
    return '' if value is None else str(value)


def table_one(collections):
    """
    Dataset statistics per collection type

    Args:
        collections: Ordered {name: records}, e.g. random trials, multi-staged, test set

    Returns:
        Rows ending with a total row over every collection
    """
    rows, everything = [], []
    for name, records in collections.items():
        records = list(records)
        everything.extend(records)
        rows.append(summarize(records).as_row(name))
    rows.append(summarize(everything).as_row('Total'))
    return rows


def write_json_lines(path, items):
    with open(path, 'w') as handle:
        for item in items:
            handle.write(json.dumps(item, sort_keys=True) + '\n')
