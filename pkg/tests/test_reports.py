"""Tests for CSV/JSON emission, the stability criteria and the verifier."""

import csv
import json
import math

import pytest

from src.errors import ConfigError
from src.projector import REPORT_COLUMNS
from src.reports import (SCHEMAS, Criterion, ReportRow, emit_report, format_value, l2_window_ok,
                         log_growth_ok, ratio_growth_ok, verify)
from src.sumproduct import SUMPRODUCT_COLUMNS


def bound_row(order, level, lhs, rhs, check='projection_general'):
    values = dict(check=check, d=2, n=1, s=1.1, sigma=1.0, alpha=1.1, p=2.1, level=level,
                  lhs=lhs, rhs=rhs, ratio=lhs / rhs, family_size=64)
    return ReportRow('bound', order, level, values)


def write_csv(path, columns, rows):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\r\n')
        writer.writerow(columns)
        writer.writerows(rows)


class TestFormat:
    @pytest.mark.parametrize("value,text", [(None, ''), (True, 'true'), (False, 'false'),
                                            (0.1, '0.10000000000000001'), (3, '3'),
                                            (math.inf, 'inf'), ('x', 'x')])
    def test_values(self, value, text):
        assert format_value(value) == text


class TestCriteria:
    def test_ratio_growth(self):
        assert ratio_growth_ok([6, 7, 8], [1.0, 1.4, 1.9])[0]
        assert not ratio_growth_ok([6, 7], [1.0, 2.0])[0]
        assert not ratio_growth_ok([6, 7], [1.0, math.inf])[0]

    def test_log_growth(self):
        assert log_growth_ok([6, 12], [1.0, 3.9])[0]
        assert not log_growth_ok([6, 12], [1.0, 17.0])[0]

    def test_l2_window(self):
        assert l2_window_ok([6, 7, 8], [1.0, 2.0, 3.0])[0]
        assert not l2_window_ok([6, 7, 8], [1.0, 2.0, 4.5])[0]


class TestEmit:
    def test_empty_run_writes_bound_header(self, tmp_path):
        paths = emit_report([], {'pass': True}, tmp_path)
        assert paths == [tmp_path / 'results.csv', tmp_path / 'summary.json']
        assert (tmp_path / 'results.csv').read_bytes() == (','.join(REPORT_COLUMNS) + '\r\n').encode()

    def test_rows_sorted_by_experiment_then_level(self, tmp_path):
        rows = [bound_row(1, 6, 1.0, 2.0), bound_row(0, 8, 1.0, 3.0), bound_row(0, 7, 1.0, 4.0)]
        emit_report(rows, {}, tmp_path)
        with open(tmp_path / 'results.csv', newline='', encoding='utf-8') as f:
            records = list(csv.DictReader(f))
        assert [(r['level'], r['rhs']) for r in records] == [('7', '4'), ('8', '3'), ('6', '2')]

    def test_crlf_line_endings(self, tmp_path):
        emit_report([bound_row(0, 6, 1.0, 2.0)], {}, tmp_path)
        content = (tmp_path / 'results.csv').read_bytes()
        assert content.count(b'\r\n') == 2
        assert b'\n' not in content.replace(b'\r\n', b'')

    def test_several_schemas_split_files(self, tmp_path):
        rows = [ReportRow('energy', 0, 2, dict(measure='two_atom', level=2, quantity='energy',
                                               exponent=1.0, value=8 / 3)),
                ReportRow('gen', 1, 12, dict(kind='cantor', level=12, s=0.5, cells=64,
                                             audit_constant=2.0, audit_pass=True))]
        paths = emit_report(rows, {}, tmp_path)
        assert [p.name for p in paths] == ['results_energy.csv', 'results_gen.csv', 'summary.json']
        header = (tmp_path / 'results_gen.csv').read_text(encoding='utf-8').splitlines()[0]
        assert tuple(header.split(',')) == SCHEMAS['gen']

    def test_summary_serializes_criteria(self, tmp_path):
        summary = {'criteria': [Criterion('gen', 'non_concentration', True, 'ok')], 'pass': True}
        emit_report([], summary, tmp_path)
        data = json.loads((tmp_path / 'summary.json').read_text(encoding='utf-8'))
        assert data['criteria'][0]['name'] == 'non_concentration'
        assert data['criteria'][0]['advisory'] is False


class TestVerify:
    def test_consistent_file(self, tmp_path):
        emit_report([bound_row(0, level, 1.0, 2.0 - 0.1 * level) for level in (6, 7, 8)], {}, tmp_path)
        ok, problems = verify(tmp_path / 'results.csv')
        assert ok and not problems

    def test_tampered_ratio(self, tmp_path):
        row = bound_row(0, 6, 1.0, 2.0)
        row.values['ratio'] = 0.75
        emit_report([row], {}, tmp_path)
        ok, problems = verify(tmp_path / 'results.csv')
        assert not ok
        assert 'row 2' in problems[0]

    def test_growth_failure(self, tmp_path):
        emit_report([bound_row(0, 6, 1.0, 2.0), bound_row(0, 7, 2.0, 2.0)], {}, tmp_path)
        ok, problems = verify(tmp_path / 'results.csv')
        assert not ok
        assert 'growth' in problems[0]

    def test_sumproduct_pass_flag(self, tmp_path):
        path = tmp_path / 'sp.csv'
        good = ['8', '0.5', '0.5', '0.0625', '0.2', '0.3', '0.3', '1', '0.0625', '4.8', 'true']
        bad = ['9', '0.5', '0.5', '0.0625', '0.01', '0.01', '0.01', '1', '0.0625', '0.16', 'true']
        write_csv(path, SUMPRODUCT_COLUMNS, [good, bad])
        ok, problems = verify(path)
        assert not ok
        assert len(problems) == 1 and problems[0].startswith('row 3')

    def test_unknown_header(self, tmp_path):
        path = tmp_path / 'odd.csv'
        write_csv(path, ['a', 'b'], [['1', '2']])
        with pytest.raises(ConfigError):
            verify(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            verify(tmp_path / 'none.csv')
