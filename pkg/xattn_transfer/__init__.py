"""インストール可能なソースコードパッケージ。"""
