import logging

from pfbi.cli import main
from pfbi.errors import (DegenerateWeights, DimensionError, DimensionMismatch, EmptyDataset,
                         FactorizationFailure, InsufficientSamples, InvalidParameter, NonFiniteLoss,
                         ParseError, PfbiError)
from pfbi.log import LOG_FORMAT, init_logger, set_debug_log


class TestLoggers:
    def test_debug_file(self, tmp_path):
        path = str(tmp_path / "debug.log")
        set_debug_log(path)
        try:
            logger = init_logger('pfbi.test.debugfile')
            logger.debug("particle check")
            for h in logger.handlers:
                h.flush()
        finally:
            set_debug_log(None)
        with open(path) as f:
            text = f.read()
        assert "pfbi.test.debugfile - DEBUG - particle check" in text

    def test_console_handler_added_once(self):
        logger = init_logger('pfbi.test.once')
        init_logger('pfbi.test.once')
        consoles = [h for h in logger.handlers if type(h) is logging.StreamHandler]
        assert len(consoles) == 1
        assert consoles[0].formatter._fmt == LOG_FORMAT

    def test_cli_log_file(self, tmp_path):
        log = str(tmp_path / "run.log")
        try:
            assert main(['--log-file', log, 'gen', '--n', '10', '--out', str(tmp_path / "d.csv")]) == 0
        finally:
            set_debug_log(None)
        with open(log) as f:
            assert "Run configuration" in f.read()


class TestErrors:
    def test_exit_codes(self):
        assert InvalidParameter.exit_code == 1
        for cls in (ParseError, DimensionMismatch, DimensionError, EmptyDataset, InsufficientSamples):
            assert cls.exit_code == 2
        for cls in (FactorizationFailure, NonFiniteLoss, DegenerateWeights):
            assert cls.exit_code == 3

    def test_hierarchy(self):
        assert issubclass(InvalidParameter, ValueError)
        assert issubclass(DimensionError, DimensionMismatch)
        assert all(issubclass(c, PfbiError) for c in (ParseError, NonFiniteLoss, EmptyDataset))
