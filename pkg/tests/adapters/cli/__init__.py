"""CLIコマンドのテストモジュール"""
